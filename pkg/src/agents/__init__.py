"""Seeded agent-based simulation: price paths, trader populations and experiment runs."""
