"""Volatility regression with AIC choice of the volatility lag count."""

import logging
from dataclasses import replace
from functools import partial
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..decompose.arima import DecomposedSeries
from ..runtime.parallel import map_jobs
from ..volatility.garman_klass import VolatilityPoint
from .design import ModelSpec, build_design
from .errors import InsufficientObservationsError, NoUsableLagError, RankDeficiencyError
from .ols import RegressionResult, ols

logger = logging.getLogger(__name__)

DEFAULT_M_GRID = tuple(range(1, 8))


def _is_constant(values: np.ndarray) -> bool:
    return values.size > 0 and float(np.ptp(values)) == 0.0


def drop_constant_terms(
    template: ModelSpec, decomposed: Mapping[str, DecomposedSeries], first_row: int = 0
) -> Tuple[ModelSpec, Tuple[str, ...]]:
    """
    Remove roster series that never vary from ``first_row`` on.

    A constant series (a side that saw no liquidation in the sample) gives an
    expected column collinear with the intercept and an all-zero unexpected
    column.

    Returns:
        The reduced spec and the names removed, in roster order
    """
    dropped = tuple(
        name for name in template.roster if name in decomposed and _is_constant(decomposed[name].observed[first_row:])
    )
    if not dropped:
        return template, ()
    logger.warning("%s: dropping constant regressors %s", template.label, ", ".join(dropped))
    return replace(template, roster=tuple(n for n in template.roster if n not in dropped)), dropped


def _aic_for_lag(m, volatility, decomposed, template: ModelSpec, first_row: int) -> Optional[float]:
    spec = template.with_lag(m)
    try:
        design = build_design(volatility, decomposed, spec, first_row=first_row)
        return ols(design.X, design.y, design.names).aic
    except (InsufficientObservationsError, RankDeficiencyError) as e:
        logger.info("lag m=%d rejected: %s", m, e)
        return None


def fit_volatility_model(
    volatility: Sequence[VolatilityPoint],
    decomposed: Mapping[str, DecomposedSeries],
    template: ModelSpec,
    m_grid: Iterable[int] = DEFAULT_M_GRID,
    robust: bool = False,
    jobs: int = 1,
) -> RegressionResult:
    """
    Fit the volatility model for every lag count and keep the AIC minimum.

    Candidates are compared on the sample that the largest lag count leaves
    usable; the winner is then refitted on its own, longer sample. Ties go
    to the smaller m. Roster series that are constant over that sample are
    left out of every candidate and listed under ``metadata["dropped_terms"]``.

    Args:
        volatility: Response series
        decomposed: Decomposed activity series by name
        template: Model spec whose ``m`` is replaced by each grid value
        m_grid: Candidate lag counts (default 1..7)
        robust: Report HC1 standard errors
        jobs: Worker count across the grid

    Returns:
        RegressionResult of the chosen lag count, with ``lag_order`` set and
        the AIC of every candidate under ``metadata["aic_by_m"]``

    Raises:
        NoUsableLagError: Every lag count failed
    """
    grid = sorted(set(m_grid))
    if not grid:
        raise ValueError("m-grid is empty")
    first_row = max(grid)
    template, dropped = drop_constant_terms(template, decomposed, first_row)
    scores = map_jobs(
        partial(_aic_for_lag, volatility=volatility, decomposed=decomposed, template=template, first_row=first_row),
        grid,
        jobs,
    )
    aic_by_m: Dict[int, float] = {m: aic for m, aic in zip(grid, scores) if aic is not None}
    if not aic_by_m:
        raise NoUsableLagError(f"No lag count in {grid} gave a usable {template.label} regression")

    best = min(aic_by_m, key=lambda m: (aic_by_m[m], m))
    spec = template.with_lag(best)
    design = build_design(volatility, decomposed, spec)
    result = ols(design.X, design.y, design.names, robust=robust)
    logger.info("%s: chose m=%d (AIC %.3f) over %s", template.label, best, aic_by_m[best], sorted(aic_by_m))
    return replace(
        result,
        lag_order=best,
        label=spec.label,
        metadata={
            "aic_by_m": aic_by_m,
            "model": spec.model.value,
            "exchange_kind": spec.exchange_kind.value,
            "dropped_terms": list(dropped),
            "first_date": design.dates[0].isoformat(),
            "last_date": design.dates[-1].isoformat(),
        },
    )
