"""Ordinary least squares via column-scaled, pivoted QR.

Each design column is divided by its root mean square before the
factorization and the coefficients and covariance are mapped back, so
regressors in the billions of USD sit next to daily volatilities of order
1e-2 without conditioning trouble.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from .errors import InsufficientObservationsError, RankDeficiencyError

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10
RSS_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class RegressionResult:
    """Fitted least-squares model.

    Coefficient, standard-error, t and p vectors follow ``names``.
    """

    names: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r2: float
    adj_r2: float
    aic: float
    rss: float
    residuals: np.ndarray
    n_obs: int
    df_resid: int
    robust: bool = False
    lag_order: Optional[int] = None
    label: str = ""
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        sizes = {len(self.names), len(self.coefficients), len(self.std_errors), len(self.t_stats), len(self.p_values)}
        if len(sizes) != 1:
            raise ValueError("coefficient vectors have different lengths")

    def index(self, name: str) -> int:
        return self.names.index(name)

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.index(name)])

    def t_stat(self, name: str) -> float:
        return float(self.t_stats[self.index(name)])

    def as_dict(self) -> Dict[str, Dict[str, float]]:
        """Per-variable estimates keyed by name."""
        return {
            name: {
                "coefficient": float(self.coefficients[i]),
                "std_error": float(self.std_errors[i]),
                "t_stat": float(self.t_stats[i]),
                "p_value": float(self.p_values[i]),
            }
            for i, name in enumerate(self.names)
        }


def _collinear_columns(r: np.ndarray, pivots: np.ndarray, rank: int, names: Sequence[str]):
    dependent = list(pivots[rank:])
    involved = set(dependent)
    if rank:
        # Express each dependent column through the independent block R11.
        weights = linalg.solve_triangular(r[:rank, :rank], r[:rank, rank:])
        for j in range(weights.shape[1]):
            scale = max(np.max(np.abs(weights[:, j])), 1.0)
            involved.update(pivots[i] for i in range(rank) if abs(weights[i, j]) > 1e-8 * scale)
    return [names[i] for i in sorted(involved)]


def ols(
    X: np.ndarray,
    y: np.ndarray,
    names: Optional[Sequence[str]] = None,
    robust: bool = False,
) -> RegressionResult:
    """
    Least-squares fit of ``y`` on the columns of ``X``.

    ``X`` must contain the intercept column explicitly if one is wanted.

    Args:
        X: Design matrix, n x k
        y: Response, length n
        names: Column names, defaults to x0..x{k-1}
        robust: Report HC1 heteroskedasticity-robust standard errors

    Returns:
        RegressionResult with classical (or HC1) standard errors, R-squared,
        adjusted R-squared and AIC = n ln(RSS/n) + 2k

    Raises:
        InsufficientObservationsError: n < k + 1
        RankDeficiencyError: Design not of full column rank
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"Incompatible shapes {X.shape} and {y.shape}")
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(k))
    if len(names) != k:
        raise ValueError(f"{len(names)} names for {k} columns")
    if n < k + 1:
        raise InsufficientObservationsError(n, k + 1)

    scales = np.sqrt(np.mean(X * X, axis=0))
    zero_columns = [names[i] for i in range(k) if scales[i] == 0.0]
    if zero_columns:
        raise RankDeficiencyError(zero_columns)
    Xs = X / scales

    q, r, pivots = linalg.qr(Xs, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    rank = int(np.sum(diagonal > RANK_TOLERANCE * diagonal[0]))
    if rank < k:
        raise RankDeficiencyError(_collinear_columns(r, pivots, rank, names))

    qty = q.T @ y
    beta_pivoted = linalg.solve_triangular(r, qty)
    beta_scaled = np.empty(k)
    beta_scaled[pivots] = beta_pivoted
    coefficients = beta_scaled / scales

    residuals = y - X @ coefficients
    rss = float(residuals @ residuals)
    df_resid = n - k

    r_inv = linalg.solve_triangular(r, np.eye(k))
    if robust:
        bread = r_inv @ q.T
        cov_pivoted = (bread * residuals**2) @ bread.T * (n / df_resid)
    else:
        cov_pivoted = (r_inv @ r_inv.T) * (rss / df_resid)
    cov_scaled = np.empty((k, k))
    cov_scaled[np.ix_(pivots, pivots)] = cov_pivoted
    cov = cov_scaled / np.outer(scales, scales)
    std_errors = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = coefficients / std_errors
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), df_resid)

    centered = y - y.mean()
    tss = float(centered @ centered)
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    r2 = min(r2, 1.0)
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df_resid
    aic = n * math.log(max(rss / n, RSS_FLOOR)) + 2 * k
    logger.debug("ols n=%d k=%d rss=%.6g r2=%.6f", n, k, rss, r2)
    return RegressionResult(
        names=names,
        coefficients=coefficients,
        std_errors=std_errors,
        t_stats=t_stats,
        p_values=p_values,
        r2=r2,
        adj_r2=adj_r2,
        aic=aic,
        rss=rss,
        residuals=residuals,
        n_obs=n,
        df_resid=df_resid,
        robust=robust,
    )
