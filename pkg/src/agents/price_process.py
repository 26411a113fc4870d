"""Exogenous price paths for simulated experiments.

The path is sampled ``steps_per_day`` times per day. Daily candles aggregate
the points of each day, including the previous day's last point as the open.
"""

import datetime as dt
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence

import numpy as np

from ..marketdata.records import Candle

logger = logging.getLogger(__name__)

GBM = "gbm"
JUMP_DIFFUSION = "jump"
MODELS = (GBM, JUMP_DIFFUSION)

DAYS_PER_YEAR = 365
DEFAULT_START = dt.date(2023, 1, 1)
# Entropy word keeping the price stream apart from the trader-class streams.
PRICE_STREAM = 0


@dataclass(frozen=True)
class PriceProcess:
    """Geometric Brownian motion, optionally with compound-Poisson log jumps.

    ``drift`` and ``volatility`` are annual; ``jump_intensity`` is the
    expected number of jumps per year, each a normal log-price move of mean
    ``jump_mean`` and standard deviation ``jump_std``.
    """

    model: str = GBM
    drift: float = 0.0
    volatility: float = 0.6
    jump_intensity: float = 0.0
    jump_mean: float = 0.0
    jump_std: float = 0.0
    steps_per_day: int = 96
    initial_price: float = 30_000.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"Unknown price model {self.model!r} (expected one of: {', '.join(MODELS)})")
        if not (math.isfinite(self.volatility) and self.volatility >= 0):
            raise ValueError(f"volatility must be >= 0, got {self.volatility!r}")
        if self.steps_per_day < 1:
            raise ValueError(f"steps per day must be >= 1, got {self.steps_per_day!r}")
        if not self.initial_price > 0:
            raise ValueError(f"initial price must be > 0, got {self.initial_price!r}")
        if self.jump_intensity < 0 or self.jump_std < 0:
            raise ValueError("jump intensity and jump size deviation must be >= 0")

    @property
    def step_fraction(self) -> float:
        """Length of one step in years."""
        return 1.0 / (DAYS_PER_YEAR * self.steps_per_day)

    def simulate(self, days: int) -> np.ndarray:
        """
        Sample the path.

        Args:
            days: Number of days

        Returns:
            ``days * steps_per_day + 1`` prices, starting at ``initial_price``
        """
        if days < 1:
            raise ValueError(f"days must be >= 1, got {days!r}")
        rng = np.random.default_rng([self.seed, PRICE_STREAM])
        steps = days * self.steps_per_day
        tau = self.step_fraction
        increments = (self.drift - 0.5 * self.volatility**2) * tau + self.volatility * math.sqrt(
            tau
        ) * rng.standard_normal(steps)
        if self.model == JUMP_DIFFUSION:
            counts = rng.poisson(self.jump_intensity * tau, steps)
            sizes = rng.standard_normal(steps)
            increments = increments + counts * self.jump_mean + np.sqrt(counts) * self.jump_std * sizes
        log_moves = np.concatenate(([0.0], np.cumsum(increments)))
        return self.initial_price * np.exp(log_moves)

    def describe(self) -> Dict[str, Any]:
        return asdict(self)


def candles_from_path(prices: Sequence[float], steps_per_day: int, start: dt.date = DEFAULT_START) -> List[Candle]:
    """
    Aggregate an intraday path into daily candles.

    Args:
        prices: ``days * steps_per_day + 1`` points
        steps_per_day: Points per day after the opening point
        start: Date of the first candle

    Returns:
        One Candle per day
    """
    prices = np.asarray(prices, dtype=float)
    if steps_per_day < 1 or (prices.size - 1) % steps_per_day or prices.size < 2:
        raise ValueError(f"path of {prices.size} points does not split into days of {steps_per_day} steps")
    windows = np.lib.stride_tricks.sliding_window_view(prices, steps_per_day + 1)[::steps_per_day]
    highs = windows.max(axis=1)
    lows = windows.min(axis=1)
    return [
        Candle(
            start + dt.timedelta(days=day),
            float(window[0]),
            float(highs[day]),
            float(lows[day]),
            float(window[-1]),
        )
        for day, window in enumerate(windows)
    ]


def generate_path(process: PriceProcess, days: int, start: dt.date = DEFAULT_START) -> List[Candle]:
    """
    Daily candles of a freshly simulated path.

    Deterministic per ``process.seed``.
    """
    candles = candles_from_path(process.simulate(days), process.steps_per_day, start)
    logger.debug("generated %d candles (%s, seed %d)", len(candles), process.model, process.seed)
    return candles
