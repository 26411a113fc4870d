"""Market data model: candles, daily trading activity, ingestion."""
