"""ARIMA fitting and expected/unexpected decomposition of activity series."""
