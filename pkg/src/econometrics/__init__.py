"""Least squares, volatility regressions and Granger causality tests."""
