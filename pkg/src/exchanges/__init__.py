"""Exchange engines: limit order book, oracle pricing and the VAMM adapter."""
