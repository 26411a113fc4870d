"""perplab: perpetual-futures exchange models and volatility econometrics."""

__version__ = "0.3.0"
