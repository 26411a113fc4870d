"""Canonical records for daily candles and trading activity.

Units: every price is USD per unit of the underlying; volume, open interest
and liquidation fields are USD notionals; leverage fields are dimensionless
multiples.
"""

import datetime as dt
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DateGapError,
    DuplicateDateError,
    MissingValuesError,
    NegativeValueError,
    OHLCInconsistencyError,
    OpenInterestMismatchError,
)

USD_FIELDS = ("volume", "oi_long", "oi_short", "liq_long", "liq_short")
LEVERAGE_FIELDS = ("lev_long", "lev_short")
ACTIVITY_FIELDS = USD_FIELDS + LEVERAGE_FIELDS

OI_RELATIVE_TOLERANCE = 1e-6


class SourceTag(str, Enum):
    """Where an activity series came from."""

    LOB_CEX = "lob-cex"
    VAMM = "vamm"
    ORACLE = "oracle"
    SIMULATED = "simulated"

    @classmethod
    def parse(cls, value: str) -> "SourceTag":
        try:
            return cls(value)
        except ValueError:
            valid = ", ".join(tag.value for tag in cls)
            raise ValueError(f"Unknown source tag {value!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class Candle:
    """One day of OHLC prices for the underlying."""

    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise OHLCInconsistencyError(f"Non-positive or non-finite price on {self.date}")
        if self.low > self.high:
            raise OHLCInconsistencyError(f"low {self.low} > high {self.high} on {self.date}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise OHLCInconsistencyError(f"open/close outside [low, high] on {self.date}")

    def scaled(self, factor: float) -> "Candle":
        """Return the candle with every price multiplied by ``factor``."""
        return Candle(
            self.date,
            self.open * factor,
            self.high * factor,
            self.low * factor,
            self.close * factor,
        )


def log_return(candle: Candle) -> float:
    """Intraday log-form return ln(close) - ln(open)."""
    return math.log(candle.close) - math.log(candle.open)


def log_returns(candles: Sequence[Candle]) -> np.ndarray:
    """Vector of :func:`log_return` over ``candles``."""
    return np.array([log_return(c) for c in candles], dtype=float)


@dataclass(frozen=True)
class ActivityRecord:
    """Daily trading aggregates of one exchange.

    ``lev_long``/``lev_short`` are ``None`` where leverage is undefined
    (cross-margined exchanges). ``imputed`` marks forward-filled days.
    """

    date: dt.date
    volume: float
    oi_long: float
    oi_short: float
    liq_long: float
    liq_short: float
    lev_long: Optional[float] = None
    lev_short: Optional[float] = None
    imputed: bool = False

    def __post_init__(self):
        for name in USD_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise NegativeValueError(f"{name} must be finite and >= 0, got {value!r} on {self.date}")
        for name in LEVERAGE_FIELDS:
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0):
                raise NegativeValueError(f"{name} must be finite and >= 0, got {value!r} on {self.date}")

    @property
    def has_leverage(self) -> bool:
        return self.lev_long is not None and self.lev_short is not None


def open_interest_matches(oi_long: float, oi_short: float) -> bool:
    """CEX identity check: equal long and short OI within relative tolerance."""
    scale = max(abs(oi_long), abs(oi_short))
    return abs(oi_long - oi_short) <= OI_RELATIVE_TOLERANCE * scale


@dataclass(frozen=True)
class ActivitySeries:
    """Gap-free, date-ordered sequence of :class:`ActivityRecord`."""

    records: Tuple[ActivityRecord, ...]
    source: SourceTag = SourceTag.SIMULATED
    dates: Tuple[dt.date, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "dates", tuple(r.date for r in records))
        for index in range(1, len(records)):
            previous, current = records[index - 1].date, records[index].date
            if current <= previous:
                raise DuplicateDateError(f"Date {current} does not follow {previous}", index + 1)
            if current - previous != dt.timedelta(days=1):
                raise DateGapError(previous + dt.timedelta(days=1), index + 1)
        if self.source is SourceTag.LOB_CEX:
            for index, record in enumerate(records, start=1):
                if not open_interest_matches(record.oi_long, record.oi_short):
                    raise OpenInterestMismatchError(
                        f"CEX open interest differs: long {record.oi_long!r} vs short {record.oi_short!r}",
                        index,
                    )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def has_leverage(self) -> bool:
        return bool(self.records) and all(r.has_leverage for r in self.records)

    @property
    def imputed_mask(self) -> np.ndarray:
        return np.array([r.imputed for r in self.records], dtype=bool)

    def available_fields(self) -> List[str]:
        """Activity columns that are fully populated."""
        names = list(USD_FIELDS)
        if self.has_leverage:
            names.extend(LEVERAGE_FIELDS)
        return names

    def column(self, name: str) -> np.ndarray:
        """
        Return one activity column as a float array.

        Args:
            name: One of ``ACTIVITY_FIELDS``

        Raises:
            KeyError: Unknown column
            MissingValuesError: Column has absent values
        """
        if name not in ACTIVITY_FIELDS:
            raise KeyError(name)
        values = [getattr(r, name) for r in self.records]
        for index, value in enumerate(values, start=1):
            if value is None:
                raise MissingValuesError(f"Column {name} has no value", index)
        return np.array(values, dtype=float)

    def window(self, start: dt.date, end: dt.date) -> "ActivitySeries":
        """Sub-series with dates in ``[start, end]``."""
        kept = [r for r in self.records if start <= r.date <= end]
        return ActivitySeries(tuple(kept), self.source)


def fill_gaps(records: Iterable[ActivityRecord]) -> List[ActivityRecord]:
    """
    Forward-fill missing calendar days.

    Each inserted day repeats the previous day's levels (open interest,
    leverage), carries zero flows (volume, liquidations) and is flagged
    ``imputed``.
    """
    filled: List[ActivityRecord] = []
    for record in records:
        if filled:
            previous = filled[-1]
            day = previous.date + dt.timedelta(days=1)
            while day < record.date:
                filled.append(
                    replace(
                        previous,
                        date=day,
                        volume=0.0,
                        liq_long=0.0,
                        liq_short=0.0,
                        imputed=True,
                    )
                )
                day += dt.timedelta(days=1)
        filled.append(record)
    return filled
