"""Granger-causality F test."""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import special

from .errors import InsufficientObservationsError
from .ols import ols

logger = logging.getLogger(__name__)

DEFAULT_MAX_LAG = 15


@dataclass(frozen=True)
class GrangerResult:
    """Outcome of testing whether ``cause`` helps predict ``effect``."""

    cause: str
    effect: str
    max_lag: int
    f_stat: float
    p_value: float
    df_num: int
    df_denom: int
    n_obs: int

    @property
    def direction(self) -> str:
        return f"{self.cause} -> {self.effect}"

    @property
    def hypothesis(self) -> str:
        return f"{self.cause} does not Granger-cause {self.effect}"


def f_survival(f_stat: float, df_num: int, df_denom: int) -> float:
    """P(F > f_stat) through the regularized incomplete beta function."""
    if f_stat <= 0.0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    x = df_denom / (df_denom + df_num * f_stat)
    return float(special.betainc(0.5 * df_denom, 0.5 * df_num, x))


def _lags(values: np.ndarray, max_lag: int) -> np.ndarray:
    n = len(values) - max_lag
    return np.column_stack([values[max_lag - i : max_lag - i + n] for i in range(1, max_lag + 1)])


def granger_test(
    x: Sequence[float],
    y: Sequence[float],
    max_lag: int = DEFAULT_MAX_LAG,
    x_name: str = "x",
    y_name: str = "y",
) -> GrangerResult:
    """
    Test H0: lags of ``x`` do not improve the prediction of ``y`` beyond its own lags.

    Args:
        x: Candidate cause
        y: Effect
        max_lag: Number of lags L of each series
        x_name: Label of ``x`` in the hypothesis
        y_name: Label of ``y`` in the hypothesis

    Returns:
        GrangerResult with F = ((RSS_r - RSS_u)/L) / (RSS_u/(n - 2L - 1))

    Raises:
        InsufficientObservationsError: length <= 3L + 5
        RankDeficiencyError: Lagged regressors are collinear
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"Series lengths differ: {len(x)} vs {len(y)}")
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if len(y) <= 3 * max_lag + 5:
        raise InsufficientObservationsError(len(y), 3 * max_lag + 6)

    response = y[max_lag:]
    n = len(response)
    own = _lags(y, max_lag)
    other = _lags(x, max_lag)
    const = np.ones((n, 1))
    own_names = [f"{y_name}_lag_{i}" for i in range(1, max_lag + 1)]
    other_names = [f"{x_name}_lag_{i}" for i in range(1, max_lag + 1)]

    restricted = ols(np.hstack((const, own)), response, ["const"] + own_names)
    unrestricted = ols(np.hstack((const, own, other)), response, ["const"] + own_names + other_names)

    df_denom = n - 2 * max_lag - 1
    f_stat = max((restricted.rss - unrestricted.rss) / max_lag, 0.0) / (unrestricted.rss / df_denom)
    p_value = f_survival(f_stat, max_lag, df_denom)
    logger.debug("granger %s -> %s: F=%.4f p=%.4g", x_name, y_name, f_stat, p_value)
    return GrangerResult(x_name, y_name, max_lag, f_stat, p_value, max_lag, df_denom, n)


def granger_pair(
    x: Sequence[float],
    y: Sequence[float],
    names: Tuple[str, str] = ("x", "y"),
    max_lag: int = DEFAULT_MAX_LAG,
) -> List[GrangerResult]:
    """Both directions: ``x -> y`` first, then ``y -> x``."""
    x_name, y_name = names
    return [
        granger_test(x, y, max_lag, x_name, y_name),
        granger_test(y, x, max_lag, y_name, x_name),
    ]
