"""Histogram of pool liquidity over a price grid."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .concentrated import ConcentratedPool
from .errors import EmptyGridError
from .pool import VammPool

MEASURES = ("share", "active")


@dataclass(frozen=True)
class LiquidityBucket:
    low: float
    high: float
    liquidity: float


def price_grid(low: float, high: float, buckets: int) -> np.ndarray:
    """``buckets + 1`` log-spaced edges from ``low`` to ``high``."""
    if buckets < 1:
        raise EmptyGridError(f"Need at least one bucket, got {buckets}")
    if not 0 < low < high:
        raise ValueError(f"grid bounds must satisfy 0 < low < high, got {low!r}, {high!r}")
    return np.geomspace(low, high, buckets + 1)


def liquidity_distribution(pool: VammPool, grid: Sequence[float], measure: str = "share") -> List[LiquidityBucket]:
    """
    Liquidity per price bucket.

    With ``measure="share"`` each position's liquidity is spread over its range
    in proportion to log-price overlap, so buckets add up across positions and
    a grid covering every range preserves the total. ``measure="active"``
    reports the liquidity in range at each bucket's geometric midpoint.
    A uniform pool has the same liquidity ``sqrt(k)`` everywhere and reports
    it for either measure.

    Args:
        pool: Pool to inspect (not modified)
        grid: Increasing bucket edges
        measure: ``share`` or ``active``

    Returns:
        One bucket per adjacent pair of edges; empty when the pool has no positions

    Raises:
        EmptyGridError: Fewer than two edges
    """
    if measure not in MEASURES:
        raise ValueError(f"Unknown measure {measure!r} (expected one of: {', '.join(MEASURES)})")
    edges = np.asarray(grid, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise EmptyGridError(f"Price grid needs at least two edges, got {edges.size}")
    if np.any(edges <= 0) or np.any(np.diff(edges) <= 0):
        raise ValueError("price grid edges must be positive and strictly increasing")

    lows, highs = edges[:-1], edges[1:]
    if not isinstance(pool, ConcentratedPool):
        depth = float(np.sqrt(pool.k))
        return [LiquidityBucket(float(lo), float(hi), depth) for lo, hi in zip(lows, highs)]
    if not pool.positions:
        return []

    log_lows, log_highs = np.log(lows), np.log(highs)
    totals = np.zeros(lows.size)
    if measure == "share":
        for position in pool.positions.values():
            a, b = np.log(position.price_lower), np.log(position.price_upper)
            overlap = np.clip(np.minimum(log_highs, b) - np.maximum(log_lows, a), 0.0, None)
            totals += position.liquidity * overlap / (b - a)
    else:
        mids = np.exp((log_lows + log_highs) / 2.0)
        for position in pool.positions.values():
            covered = (position.price_lower <= mids) & (mids < position.price_upper)
            totals += np.where(covered, position.liquidity, 0.0)
    return [LiquidityBucket(float(lo), float(hi), float(v)) for lo, hi, v in zip(lows, highs, totals)]
