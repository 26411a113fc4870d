"""Model specifications and design matrices for the volatility regressions.

Column order is fixed: ``const``, ``sigma_lag_1..m``, then expected and
unexpected trading activity (long OI, short OI, volume), expected and
unexpected liquidations (long, short) and, for the leverage model, expected
and unexpected leverage (long, short).
"""

import datetime as dt
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..decompose.arima import DecomposedSeries
from ..volatility.garman_klass import VolatilityPoint
from .errors import (
    DateMisalignmentError,
    InsufficientObservationsError,
    MissingRosterEntryError,
    RosterViolationError,
    UnsupportedModelError,
)

ACTIVITY_TERMS = ("oi_long", "oi_short", "volume")
LIQUIDATION_TERMS = ("liq_long", "liq_short")
LEVERAGE_TERMS = ("lev_long", "lev_short")


class ModelKind(str, Enum):
    """Volatility model: activity and liquidations, optionally with leverage."""

    EQ2 = "eq2"
    EQ3 = "eq3"


class ExchangeKind(str, Enum):
    CEX = "cex"
    VAMM = "vamm"
    ORACLE = "oracle"


@dataclass(frozen=True)
class ModelSpec:
    """Which regressors enter a volatility model and how many volatility lags.

    ``roster`` names the decomposed series used; each contributes an
    ``expected_<name>`` and an ``unexpected_<name>`` column.
    """

    model: ModelKind
    exchange_kind: ExchangeKind
    m: int
    roster: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        object.__setattr__(self, "exchange_kind", ExchangeKind(self.exchange_kind))
        object.__setattr__(self, "roster", tuple(self.roster))
        if self.m < 1:
            raise ValueError(f"lag count m must be >= 1, got {self.m}")
        if self.exchange_kind is ExchangeKind.CEX and "oi_long" in self.roster:
            raise RosterViolationError(
                "CEX models use short open interest only; long and short open interest are identical"
            )
        if self.model is ModelKind.EQ3 and self.exchange_kind is ExchangeKind.VAMM:
            raise UnsupportedModelError("The leverage model needs leverage series, which VAMM exchanges do not produce")
        unknown = set(self.roster) - set(ACTIVITY_TERMS + LIQUIDATION_TERMS + LEVERAGE_TERMS)
        if unknown:
            raise ValueError(f"Unknown roster entries: {', '.join(sorted(unknown))}")

    @classmethod
    def for_exchange(cls, model, exchange_kind, m: int = 1) -> "ModelSpec":
        """Default roster of ``model`` for an exchange kind."""
        model = ModelKind(model)
        exchange_kind = ExchangeKind(exchange_kind)
        if model is ModelKind.EQ3 and exchange_kind is ExchangeKind.VAMM:
            raise UnsupportedModelError("The leverage model needs leverage series, which VAMM exchanges do not produce")
        activity = ACTIVITY_TERMS[1:] if exchange_kind is ExchangeKind.CEX else ACTIVITY_TERMS
        roster = activity + LIQUIDATION_TERMS
        if model is ModelKind.EQ3:
            roster += LEVERAGE_TERMS
        return cls(model, exchange_kind, m, roster)

    def with_lag(self, m: int) -> "ModelSpec":
        return replace(self, m=m)

    def members_of(self, group: Sequence[str]) -> List[str]:
        return [name for name in group if name in self.roster]

    def regressor_names(self) -> List[str]:
        names: List[str] = []
        for group in (ACTIVITY_TERMS, LIQUIDATION_TERMS, LEVERAGE_TERMS):
            members = self.members_of(group)
            names += [f"expected_{name}" for name in members]
            names += [f"unexpected_{name}" for name in members]
        return names

    def column_names(self) -> List[str]:
        return ["const"] + [f"sigma_lag_{i}" for i in range(1, self.m + 1)] + self.regressor_names()

    @property
    def label(self) -> str:
        return f"{self.model.value}/{self.exchange_kind.value}"


@dataclass(frozen=True, eq=False)
class Design:
    """Regression design with one row per usable date."""

    X: np.ndarray
    y: np.ndarray
    names: Tuple[str, ...]
    dates: Tuple[dt.date, ...]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter((self.X, self.y))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.X.shape


def _check_alignment(volatility: Sequence[VolatilityPoint], series: Mapping[str, DecomposedSeries]) -> None:
    dates = tuple(p.date for p in volatility)
    for name, decomposed in series.items():
        if len(decomposed.dates) != len(dates):
            raise DateMisalignmentError(
                f"{name} has {len(decomposed.dates)} dates, volatility has {len(dates)}"
            )
        for ours, theirs in zip(dates, decomposed.dates):
            if ours != theirs:
                raise DateMisalignmentError(f"{name} date {theirs} does not match volatility", ours)


def usable_rows(spec: ModelSpec, decomposed: Mapping[str, DecomposedSeries], length: int, first_row: int) -> np.ndarray:
    """Indices t >= first_row where no roster series is in warm-up."""
    keep = np.ones(length, dtype=bool)
    keep[:first_row] = False
    for name in spec.roster:
        keep &= ~decomposed[name].warmup
    return np.flatnonzero(keep)


def build_design(
    volatility: Sequence[VolatilityPoint],
    decomposed: Mapping[str, DecomposedSeries],
    spec: ModelSpec,
    first_row: Optional[int] = None,
) -> Design:
    """
    Assemble the response and regressors of a volatility model.

    Args:
        volatility: Daily volatility estimates (the response)
        decomposed: Decomposed activity series keyed by name, sharing the volatility dates
        spec: Model specification
        first_row: Earliest row index to keep, defaults to ``spec.m``

    Returns:
        Design with rows for every date that has all lags and no warm-up regressor

    Raises:
        MissingRosterEntryError: A roster series is absent
        UnsupportedModelError: The leverage model without leverage series
        DateMisalignmentError: Dates differ between inputs
    """
    missing = [name for name in spec.roster if name not in decomposed]
    if missing:
        if spec.model is ModelKind.EQ3 and set(missing) & set(LEVERAGE_TERMS):
            raise UnsupportedModelError("The leverage model needs lev_long and lev_short series")
        raise MissingRosterEntryError(missing)
    roster = {name: decomposed[name] for name in spec.roster}
    _check_alignment(volatility, roster)

    sigma = np.array([p.sigma for p in volatility], dtype=float)
    rows = usable_rows(spec, roster, len(sigma), spec.m if first_row is None else max(first_row, spec.m))
    columns = [np.ones(len(rows))]
    columns += [sigma[rows - i] for i in range(1, spec.m + 1)]
    for group in (ACTIVITY_TERMS, LIQUIDATION_TERMS, LEVERAGE_TERMS):
        members = spec.members_of(group)
        columns += [roster[name].expected[rows] for name in members]
        columns += [roster[name].unexpected[rows] for name in members]

    names = tuple(spec.column_names())
    if len(rows) == 0:
        raise InsufficientObservationsError(0, len(names) + 1)
    X = np.column_stack(columns)
    dates = tuple(volatility[i].date for i in rows)
    return Design(X=X, y=sigma[rows], names=names, dates=dates)
