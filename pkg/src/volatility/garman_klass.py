"""Garman-Klass extreme-value volatility estimator."""

import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from ..errors import NumericalError
from ..marketdata.records import Candle

logger = logging.getLogger(__name__)

# Coefficient of the squared open/close log ratio.
GK_COEFFICIENT = 2.0 * math.log(2.0) - 1.0


class DegenerateCandleError(NumericalError):
    """The estimator's radicand is negative for a candle."""

    def __init__(self, radicand: float, date: Optional[dt.date] = None):
        """
        Initialize a DegenerateCandleError.

        Args:
            radicand: The negative value under the square root
            date: Date of the offending candle, if known
        """
        self.radicand = radicand
        self.date = date
        where = f" on {date.isoformat()}" if date is not None else ""
        super().__init__(f"Negative volatility radicand {radicand!r}{where}")


@dataclass(frozen=True)
class VolatilityPoint:
    """Estimated daily volatility (dimensionless, not annualized)."""

    date: dt.date
    sigma: float


def garman_klass_sigma(
    open_: float,
    high: float,
    low: float,
    close: float,
    *,
    clamp: bool = False,
    date: Optional[dt.date] = None,
) -> float:
    """
    Evaluate the estimator on raw prices.

    Args:
        open_, high, low, close: Strictly positive prices
        clamp: Replace a negative radicand by zero instead of raising
        date: Date reported in the error message

    Returns:
        sqrt(0.5 * ln(H/L)^2 - (2 ln 2 - 1) * ln(O/C)^2)

    Raises:
        DegenerateCandleError: Negative radicand and ``clamp`` is off
    """
    range_term = math.log(high / low)
    drift_term = math.log(open_ / close)
    radicand = 0.5 * range_term * range_term - GK_COEFFICIENT * drift_term * drift_term
    if radicand < 0.0:
        if not clamp:
            raise DegenerateCandleError(radicand, date)
        logger.debug("clamped radicand %r on %s", radicand, date)
        return 0.0
    return math.sqrt(radicand)


def garman_klass(candle: Candle, clamp: bool = False) -> VolatilityPoint:
    """Daily volatility estimate for one candle."""
    sigma = garman_klass_sigma(candle.open, candle.high, candle.low, candle.close, clamp=clamp, date=candle.date)
    return VolatilityPoint(candle.date, sigma)


def volatility_series(candles: Sequence[Candle], clamp: bool = False) -> List[VolatilityPoint]:
    """
    Apply :func:`garman_klass` to every candle, keeping their order.

    Raises:
        DegenerateCandleError: Carries the date of the first offending candle
    """
    return [garman_klass(candle, clamp) for candle in candles]


def volatility_to_csv(points: Sequence[VolatilityPoint]) -> str:
    frame = pd.DataFrame(
        {"date": [p.date.isoformat() for p in points], "sigma": [p.sigma for p in points]},
        columns=["date", "sigma"],
    )
    return frame.to_csv(index=False, lineterminator="\n", float_format="%.17g")


def write_volatility_csv(points: Sequence[VolatilityPoint], path: Union[str, Path]) -> Path:
    """Write ``date,sigma`` rows to ``path``."""
    path = Path(path)
    path.write_text(volatility_to_csv(points), encoding="utf-8")
    return path
