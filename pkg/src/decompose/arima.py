"""ARIMA(p, d, q) estimation by conditional sum of squares.

The differenced series ``w`` is centred and divided by the standard deviation
of the undifferenced input before estimation; coefficients and residuals are
reported back in the series' own units. The model is written in mean form::

    w[t] = c + sum_i ar[i] * w[t-i] + e[t] + sum_j ma[j] * e[t-j]

with pre-sample innovations set to zero. Pure AR orders are solved in closed
form by least squares; orders with MA terms are refined with BFGS starting
from the AR solution.
"""

import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize, signal

from ..runtime.parallel import map_jobs
from .errors import ConvergenceError, NoCandidateError, NonStationaryError, SeriesTooShortError, ArimaError

logger = logging.getLogger(__name__)

MIN_OBS_PER_PARAM = 10
MAX_ITER = 500
GRADIENT_TOL = 1e-5
STATIONARITY_MARGIN = 1e-8
# Floor for RSS / n so that exact fits keep a finite AIC.
RSS_FLOOR = 1e-300


@dataclass(frozen=True, order=True)
class ArimaOrder:
    """AR order p, differencing order d and MA order q. Every order carries a constant."""

    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError(f"ARIMA orders must be non-negative, got {tuple(self)}")

    def __iter__(self):
        return iter((self.p, self.d, self.q))

    def __str__(self) -> str:
        return f"({self.p},{self.d},{self.q})"

    @property
    def n_params(self) -> int:
        return self.p + self.q + 1


@dataclass(frozen=True)
class ArimaGrid:
    """Inclusive bounds of the order search."""

    max_p: int = 5
    max_d: int = 1
    max_q: int = 5

    def orders(self) -> List[ArimaOrder]:
        return [
            ArimaOrder(p, d, q)
            for d in range(self.max_d + 1)
            for p in range(self.max_p + 1)
            for q in range(self.max_q + 1)
        ]


@dataclass(frozen=True, eq=False)
class ArimaFit:
    """Result of one conditional-sum-of-squares fit.

    ``fitted`` and ``residuals`` cover the whole input. The first
    ``warmup`` entries (lost to differencing and AR conditioning) carry the
    observed value as fitted and a zero residual.
    """

    order: ArimaOrder
    ar: np.ndarray
    ma: np.ndarray
    intercept: float
    sigma2: float
    loglik: float
    aic: float
    fitted: np.ndarray
    residuals: np.ndarray
    warmup: int
    n_eff: int
    scaled_innovations: np.ndarray = field(repr=False)


def _difference(values: np.ndarray, d: int) -> np.ndarray:
    return np.diff(values, n=d) if d else values


def _robust_mean(values: np.ndarray) -> float:
    # Exact for constant input.
    return float(values[0] + np.mean(values - values[0])) if len(values) else 0.0


def _series_scale(values: np.ndarray) -> float:
    scale = float(np.std(values))
    return scale if scale > 0 and math.isfinite(scale) else 1.0


def _lag_matrix(z: np.ndarray, p: int) -> np.ndarray:
    """Rows t = p..N-1 of [1, z[t-1], ..., z[t-p]]."""
    n = len(z) - p
    columns = [np.ones(n)] + [z[p - i : p - i + n] for i in range(1, p + 1)]
    return np.column_stack(columns)


def _innovations(z: np.ndarray, p: int, params: np.ndarray) -> np.ndarray:
    """Conditional innovations e[p..N-1] for parameter vector [c, ar..., ma...]."""
    lags = _lag_matrix(z, p)
    u = z[p:] - lags @ params[: p + 1]
    ma = params[p + 1 :]
    if len(ma) == 0:
        return u
    return signal.lfilter([1.0], np.concatenate(([1.0], ma)), u)


def _ar_start(z: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return np.array([_robust_mean(z)])
    solution, *_ = linalg.lstsq(_lag_matrix(z, p), z[p:])
    return solution


def _check_stationary(ar: np.ndarray, order: ArimaOrder) -> None:
    if len(ar) == 0:
        return
    # 1 - ar1 z - ... - arp z^p, highest power first for np.roots.
    roots = np.roots(np.concatenate((-ar[::-1], [1.0])))
    if np.any(np.abs(roots) <= 1.0 + STATIONARITY_MARGIN):
        raise NonStationaryError(f"AR roots {np.round(np.abs(roots), 6).tolist()} not outside unit circle", order)


def _estimate(z: np.ndarray, order: ArimaOrder, max_iter: int) -> np.ndarray:
    start = _ar_start(z, order.p)
    if order.q == 0:
        return start
    params0 = np.concatenate((start, np.zeros(order.q)))
    n = len(z) - order.p

    def objective(params: np.ndarray) -> float:
        e = _innovations(z, order.p, params)
        value = float(e @ e) / n
        return value if math.isfinite(value) else 1e10

    result = optimize.minimize(
        objective,
        params0,
        method="BFGS",
        options={"maxiter": max_iter, "gtol": GRADIENT_TOL},
    )
    gradient_norm = float(np.max(np.abs(result.jac))) if result.jac is not None else math.inf
    if result.nit >= max_iter and gradient_norm > GRADIENT_TOL:
        raise ConvergenceError(
            f"No convergence after {result.nit} iterations (gradient norm {gradient_norm:.3g})", order
        )
    logger.debug("ARIMA%s converged in %d iterations: %s", order, result.nit, result.message)
    return result.x


def fit_arima(series: Sequence[float], order: ArimaOrder, max_iter: int = MAX_ITER) -> ArimaFit:
    """
    Fit one ARIMA order by conditional sum of squares.

    Args:
        series: Observed values (original, undifferenced scale)
        order: Order to fit
        max_iter: Optimizer iteration cap for orders with MA terms

    Returns:
        ArimaFit with fitted values and residuals on the original scale

    Raises:
        SeriesTooShortError: Fewer than 10 * (p + q + 1) differenced observations
        ConvergenceError: Iteration cap hit with gradient above tolerance
        NonStationaryError: AR estimate not stationary
    """
    y = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ArimaError("Series contains non-finite values", order)
    w = _difference(y, order.d)
    if len(w) < MIN_OBS_PER_PARAM * order.n_params or len(w) <= order.p:
        raise SeriesTooShortError(
            f"{len(w)} differenced observations, need {MIN_OBS_PER_PARAM * order.n_params}", order
        )

    scale = _series_scale(y)
    center = _robust_mean(w)
    z = (w - center) / scale

    params = _estimate(z, order, max_iter)
    ar = params[1 : order.p + 1]
    ma = params[order.p + 1 :]
    _check_stationary(ar, order)

    e = _innovations(z, order.p, params)
    n_eff = len(e)
    rss = float(e @ e)
    mean_square = max(rss / n_eff, RSS_FLOOR)
    aic = n_eff * math.log(mean_square) + 2 * order.n_params
    sigma2 = rss * scale * scale / n_eff

    warmup = order.d + order.p
    residuals = np.zeros(len(y))
    residuals[warmup:] = e * scale
    fitted = y - residuals

    intercept = center * (1.0 - float(np.sum(ar))) + float(params[0]) * scale
    loglik = -0.5 * n_eff * (math.log(2.0 * math.pi * max(sigma2, RSS_FLOOR)) + 1.0)
    return ArimaFit(
        order=order,
        ar=ar.copy(),
        ma=ma.copy(),
        intercept=intercept,
        sigma2=sigma2,
        loglik=loglik,
        aic=aic,
        fitted=fitted,
        residuals=residuals,
        warmup=warmup,
        n_eff=n_eff,
        scaled_innovations=e,
    )


def _score_order(order: ArimaOrder, series: np.ndarray, common: int, max_iter: int) -> Optional[float]:
    """AIC of ``order`` on the last ``common`` innovations, or None if the fit is rejected."""
    try:
        fit = fit_arima(series, order, max_iter)
    except ArimaError as e:
        logger.debug("skipping ARIMA%s: %s", order, e)
        return None
    tail = fit.scaled_innovations[-common:]
    mean_square = max(float(tail @ tail) / common, RSS_FLOOR)
    return common * math.log(mean_square) + 2 * order.n_params


def order_scores(
    series: Sequence[float],
    grid: ArimaGrid = ArimaGrid(),
    jobs: int = 1,
    max_iter: int = MAX_ITER,
) -> Dict[ArimaOrder, float]:
    """
    AIC of every accepted order of the grid, on the common trailing sample.

    Orders whose fit is too short, does not converge or is non-stationary are
    left out of the result.
    """
    y = np.asarray(series, dtype=float)
    orders = grid.orders()
    common = len(y) - max(o.d + o.p for o in orders)
    if common < 1:
        return {}
    scores = map_jobs(partial(_score_order, series=y, common=common, max_iter=max_iter), orders, jobs)
    return {order: score for order, score in zip(orders, scores) if score is not None}


def select_order(
    series: Sequence[float],
    grid: ArimaGrid = ArimaGrid(),
    jobs: int = 1,
    max_iter: int = MAX_ITER,
) -> ArimaOrder:
    """
    Choose the order with the smallest AIC.

    Ties are broken by the smallest (d, p + q, p).

    Raises:
        NoCandidateError: No order of the grid could be fitted
    """
    scores = order_scores(series, grid, jobs, max_iter)
    if not scores:
        raise NoCandidateError(f"No ARIMA order up to ({grid.max_p},{grid.max_d},{grid.max_q}) could be fitted")
    best = min(scores, key=lambda o: (scores[o], o.d, o.p + o.q, o.p))
    logger.info("selected ARIMA%s (AIC %.3f) from %d candidates", best, scores[best], len(scores))
    return best


@dataclass(frozen=True, eq=False)
class DecomposedSeries:
    """An activity series split into expected and unexpected components."""

    name: str
    dates: Tuple[dt.date, ...]
    observed: np.ndarray
    expected: np.ndarray
    unexpected: np.ndarray
    warmup: np.ndarray
    order: ArimaOrder
    aic: float

    def __len__(self) -> int:
        return len(self.observed)


def decompose(
    series: Sequence[float],
    grid: ArimaGrid = ArimaGrid(),
    name: str = "series",
    dates: Optional[Sequence[dt.date]] = None,
    jobs: int = 1,
) -> DecomposedSeries:
    """
    Split a series into the fitted values and residuals of its AIC-selected ARIMA fit.

    Args:
        series: Observed values
        grid: Order search bounds
        name: Activity name (volume, oi_long, ...)
        dates: Dates of the observations, defaults to day indices from 1970-01-01
        jobs: Worker count for the grid search

    Returns:
        DecomposedSeries with ``expected + unexpected == observed``
    """
    y = np.asarray(series, dtype=float)
    if dates is None:
        dates = [dt.date(1970, 1, 1) + dt.timedelta(days=i) for i in range(len(y))]
    if len(dates) != len(y):
        raise ValueError(f"{len(dates)} dates for {len(y)} observations")
    order = select_order(y, grid, jobs)
    fit = fit_arima(y, order)
    warmup = np.zeros(len(y), dtype=bool)
    warmup[: fit.warmup] = True
    return DecomposedSeries(
        name=name,
        dates=tuple(dates),
        observed=y,
        expected=fit.fitted,
        unexpected=fit.residuals,
        warmup=warmup,
        order=order,
        aic=fit.aic,
    )


def _decompose_named(item, grid: ArimaGrid) -> DecomposedSeries:
    name, values, dates = item
    return decompose(values, grid, name, dates)


def decompose_activity(
    activity,
    grid: ArimaGrid = ArimaGrid(),
    fields: Optional[Iterable[str]] = None,
    jobs: int = 1,
) -> Dict[str, DecomposedSeries]:
    """
    Decompose several columns of an ActivitySeries.

    Args:
        activity: ActivitySeries to decompose
        grid: Order search bounds
        fields: Columns to decompose, defaults to every available column
        jobs: Worker count; columns are fitted in parallel

    Returns:
        Mapping of column name to its decomposition, in column order
    """
    names = list(fields) if fields is not None else activity.available_fields()
    items = [(name, activity.column(name), activity.dates) for name in names]
    results = map_jobs(partial(_decompose_named, grid=grid), items, jobs)
    return {result.name: result for result in results}
