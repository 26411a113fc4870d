"""Extreme-value daily volatility estimation from OHLC candles."""
