"""Virtual AMM engine: pools, concentrated liquidity and the clearing house."""
