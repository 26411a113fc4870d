"""End-to-end experiment driver.

One experiment simulates a shared exogenous price path, then runs every
configured engine against it with a freshly built trader population. Each
trading step the driver publishes a market view, lets the population act,
runs the engine's risk sweep and then lets arbitrageurs act, so the prices
recorded at the end of a step already include their correction.
"""

import datetime as dt
import hashlib
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import __version__
from ..exchanges.base import Exchange
from ..exchanges.lob import LobExchange
from ..exchanges.oracle import AGGREGATORS, OracleExchange, oracle_feed
from ..exchanges.orders import Fill, LiquidationEvent
from ..exchanges.vamm_exchange import VammExchange
from ..marketdata.csv_io import write_activity, write_candles
from ..marketdata.records import ActivitySeries, Candle
from ..reporting.artifacts import write_fill_log, write_json, write_liquidity_distribution, write_net_liquidity
from ..runtime.parallel import map_jobs
from ..vamm.clearing_house import DEFAULT_INITIAL_MARGIN, DEFAULT_MAINTENANCE_MARGIN, ClearingHouse
from ..vamm.concentrated import DEFAULT_TICK_SPACING, ConcentratedPool
from ..vamm.distribution import LiquidityBucket, liquidity_distribution, price_grid
from ..vamm.pool import UniformPool
from .price_process import DEFAULT_START, PriceProcess, candles_from_path
from .traders import (
    HEDGER,
    INFORMED,
    SPECULATOR,
    UNINFORMED,
    MarketView,
    Rejection,
    TraderSpec,
    build_population,
    step_agents,
)

logger = logging.getLogger(__name__)

ENGINE_KINDS = ("lob", "oracle", "vamm")
POOL_KINDS = ("uniform", "concentrated")
# Entropy word of the oracle source-noise stream.
ORACLE_STREAM = 99
GENESIS_OWNER = "genesis"
DISTRIBUTION_BUCKETS = 60

PathLike = Union[str, Path]

DEFAULT_POPULATION: Tuple[TraderSpec, ...] = (
    TraderSpec(INFORMED, 50, leverage=2.0, activity=0.2),
    TraderSpec(UNINFORMED, 250, leverage=5.0, activity=0.05, overreaction=1.5),
    TraderSpec(HEDGER, 20, leverage=2.0, wealth=1_000_000.0),
    TraderSpec(SPECULATOR, 30, leverage=10.0, activity=0.05),
)


@dataclass(frozen=True)
class EngineSpec:
    """One engine of an experiment and its parameters.

    ``depth`` is the virtual base reserve of a uniform pool; a concentrated
    pool starts with a genesis position of the same in-range liquidity over
    ``[price / genesis_range, price * genesis_range]``.
    """

    kind: str
    initial_margin: float = DEFAULT_INITIAL_MARGIN
    maintenance_margin: float = DEFAULT_MAINTENANCE_MARGIN
    pool_capital: float = 1e10
    sources: int = 3
    source_noise: float = 0.0
    aggregate: str = "median"
    pool: str = "uniform"
    depth: float = 2_000.0
    fee_rate: float = 0.0
    tick_spacing: int = DEFAULT_TICK_SPACING
    genesis_range: float = 4.0

    def __post_init__(self):
        if self.kind not in ENGINE_KINDS:
            raise ValueError(f"Unknown engine {self.kind!r} (expected one of: {', '.join(ENGINE_KINDS)})")
        if self.pool not in POOL_KINDS:
            raise ValueError(f"Unknown pool kind {self.pool!r} (expected one of: {', '.join(POOL_KINDS)})")
        if self.aggregate not in AGGREGATORS:
            raise ValueError(f"Unknown aggregate {self.aggregate!r}")
        if not 0 < self.maintenance_margin <= self.initial_margin <= 1:
            raise ValueError("margins must satisfy 0 < maintenance <= initial <= 1")
        if self.sources < 1 or self.source_noise < 0:
            raise ValueError("an oracle needs at least one source and a non-negative noise level")
        if not (self.depth > 0 and self.pool_capital > 0 and self.genesis_range > 1):
            raise ValueError("depth and pool capital must be > 0, genesis range > 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; ``seed`` overrides the price process seed."""

    name: str = "experiment"
    days: int = 1000
    seed: int = 0
    seeds: Tuple[int, ...] = ()
    start: dt.date = DEFAULT_START
    trading_steps_per_day: int = 4
    vol_window: int = 20
    price: PriceProcess = field(default_factory=PriceProcess)
    engines: Tuple[EngineSpec, ...] = (EngineSpec("lob"),)
    traders: Tuple[TraderSpec, ...] = DEFAULT_POPULATION

    def __post_init__(self):
        object.__setattr__(self, "engines", tuple(self.engines))
        object.__setattr__(self, "traders", tuple(self.traders))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.seed < 0 or any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be >= 0")
        if self.days < 1:
            raise ValueError(f"days must be >= 1, got {self.days!r}")
        if self.trading_steps_per_day < 1 or self.price.steps_per_day % self.trading_steps_per_day:
            raise ValueError(
                f"trading steps per day ({self.trading_steps_per_day}) must divide "
                f"price steps per day ({self.price.steps_per_day})"
            )
        if self.vol_window < 2:
            raise ValueError(f"volatility window must be >= 2 steps, got {self.vol_window!r}")
        kinds = [engine.kind for engine in self.engines]
        if not kinds or len(set(kinds)) != len(kinds):
            raise ValueError(f"engines must be non-empty and distinct, got {kinds}")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def batch_seeds(self) -> Tuple[int, ...]:
        """Seeds of a batch run: ``seeds`` when given, else the single ``seed``."""
        return self.seeds or (self.seed,)

    @property
    def process(self) -> PriceProcess:
        return replace(self.price, seed=self.seed)

    def describe(self) -> Dict[str, Any]:
        """JSON-ready echo of every parameter."""
        payload = asdict(self)
        payload["start"] = self.start.isoformat()
        payload["price"]["seed"] = self.seed
        return payload


@dataclass
class EngineRun:
    """Artifacts of one engine within an experiment."""

    kind: str
    candles: List[Candle]
    activity: ActivitySeries
    fills: List[Fill]
    liquidations: List[LiquidationEvent]
    rejections: List[Rejection]
    net_liquidity: List[Tuple[dt.date, float]]
    distribution: Optional[List[LiquidityBucket]] = None
    final_state: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    candles: List[Candle]
    runs: Dict[str, EngineRun]

    def manifest(self) -> Dict[str, Any]:
        return {
            "perplab_version": __version__,
            "name": self.config.name,
            "seed": self.config.seed,
            "config": self.config.describe(),
            "engines": {
                kind: {
                    "final_state": run.final_state,
                    "fills": len(run.fills),
                    "liquidations": len(run.liquidations),
                    "rejections": len(run.rejections),
                }
                for kind, run in self.runs.items()
            },
        }


def _oracle_prices(spec: EngineSpec, config: ExperimentConfig, path: np.ndarray) -> np.ndarray:
    """Aggregated oracle price at every path point."""
    if spec.source_noise == 0:
        sources = [path] * spec.sources
    else:
        rng = np.random.default_rng([config.seed, ORACLE_STREAM])
        sources = [path * np.exp(spec.source_noise * rng.standard_normal(path.size)) for _ in range(spec.sources)]
    return oracle_feed([source.tolist() for source in sources], spec.aggregate)


def make_exchange(spec: EngineSpec, initial_price: float) -> Exchange:
    """Fresh engine for ``spec`` opened at ``initial_price``."""
    margins = dict(initial_margin=spec.initial_margin, maintenance_margin=spec.maintenance_margin)
    if spec.kind == "lob":
        return LobExchange(initial_price, **margins)
    if spec.kind == "oracle":
        return OracleExchange(initial_price, spec.pool_capital, **margins)
    if spec.pool == "uniform":
        house = ClearingHouse(UniformPool.from_price(initial_price, spec.depth, spec.fee_rate), **margins)
    else:
        house = ClearingHouse(ConcentratedPool(initial_price, spec.fee_rate, spec.tick_spacing), **margins)
        house.add_liquidity(
            GENESIS_OWNER,
            initial_price / spec.genesis_range,
            initial_price * spec.genesis_range,
            liquidity=spec.depth * math.sqrt(initial_price),
        )
    return VammExchange(house)


def _distribution(exchange: Exchange, spec: EngineSpec) -> Optional[List[LiquidityBucket]]:
    if not isinstance(exchange, VammExchange):
        return None
    price = exchange.mark_price
    grid = price_grid(price / spec.genesis_range, price * spec.genesis_range, DISTRIBUTION_BUCKETS)
    return liquidity_distribution(exchange.pool, grid)


def run_engine(spec: EngineSpec, config: ExperimentConfig, path: np.ndarray) -> EngineRun:
    """
    Drive one engine over the whole path.

    Args:
        spec: Engine to build
        config: Experiment parameters (population, days, seed)
        path: Exogenous price path, ``days * steps_per_day + 1`` points

    Returns:
        The engine's candles, activity series and logs
    """
    process = config.process
    per_day = config.trading_steps_per_day
    stride = process.steps_per_day // per_day
    step_sd = process.volatility * math.sqrt(stride * process.step_fraction)

    oracle = _oracle_prices(spec, config, path) if spec.kind == "oracle" else None
    exchange = make_exchange(spec, float(path[0]) if oracle is None else float(oracle[0]))
    groups = build_population(config.traders, config.seed)
    acting = [g for g in groups if not g.after_risk]
    settling = [g for g in groups if g.after_risk]

    returns: deque = deque(maxlen=config.vol_window)
    daily_sd = process.volatility / math.sqrt(365.0)
    candles: List[Candle] = []
    rejections: List[Rejection] = []
    last_return = day_return = 0.0

    for day in range(config.days):
        date = config.start + dt.timedelta(days=day)
        marks = [exchange.mark_price]
        for k in range(per_day):
            step = day * per_day + k
            index = day * process.steps_per_day + (k + 1) * stride
            fundamental = float(path[index])
            move = math.log(fundamental / float(path[index - stride]))
            returns.append(move)
            exchange.advance(step)
            if oracle is not None:
                exchange.set_price(float(oracle[index]))
            view = MarketView(
                step=step,
                day=day,
                step_in_day=k,
                mark=exchange.mark_price,
                fundamental=fundamental,
                outlook=float(path[min(index + stride, path.size - 1)]),
                last_return=last_return,
                day_return=day_return,
                trailing_vol=float(np.std(returns)) * math.sqrt(per_day) if len(returns) > 1 else daily_sd,
                shock=abs(move) / step_sd if step_sd > 0 else 0.0,
            )
            report = step_agents(acting, view, exchange)
            exchange.risk_sweep()
            if settling:
                report.rejections.extend(step_agents(settling, view, exchange).rejections)
            rejections.extend(report.rejections)
            mark = exchange.mark_price
            last_return = math.log(mark / marks[-1])
            marks.append(mark)
        day_return = math.log(marks[-1] / marks[0])
        candles.append(Candle(date, marks[0], max(marks), min(marks), marks[-1]))
        exchange.rollup(date)

    if oracle is not None:
        candles = candles_from_path(oracle, process.steps_per_day, config.start)
    activity = exchange.accumulator.series()
    state = exchange.pool.state() if isinstance(exchange, VammExchange) else {"price": exchange.mark_price}
    logger.info(
        "%s: %d fills, %d liquidations, %d rejections over %d days",
        spec.kind,
        len(exchange.fills),
        len(exchange.liquidations),
        len(rejections),
        config.days,
    )
    return EngineRun(
        kind=spec.kind,
        candles=candles,
        activity=activity,
        fills=list(exchange.fills),
        liquidations=list(exchange.liquidations),
        rejections=rejections,
        net_liquidity=list(exchange.accumulator.net_liquidity),
        distribution=_distribution(exchange, spec),
        final_state=state,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Run every configured engine against one shared price path.

    Deterministic: the same config (seed included) gives identical results.
    """
    process = config.process
    path = process.simulate(config.days)
    candles = candles_from_path(path, process.steps_per_day, config.start)
    logger.info("experiment %s seed %d: %d days, engines %s", config.name, config.seed, config.days,
                ", ".join(e.kind for e in config.engines))
    runs = {spec.kind: run_engine(spec, config, path) for spec in config.engines}
    return ExperimentResult(config, candles, runs)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_artifacts(result: ExperimentResult, directory: PathLike) -> Dict[str, Path]:
    """
    Write every artifact of a run plus ``manifest.json`` with their checksums.

    Layout: ``candles.csv`` (exogenous path) at the top, then one directory
    per engine with ``candles.csv``, ``activity.csv`` and ``fills.csv``; VAMM
    engines add ``liquidity.csv`` and ``liquidity_distribution.csv``.

    Returns:
        Written paths keyed by their path relative to ``directory``
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {"candles.csv": write_candles(result.candles, directory / "candles.csv")}
    for kind, run in result.runs.items():
        sub = directory / kind
        sub.mkdir(exist_ok=True)
        written[f"{kind}/candles.csv"] = write_candles(run.candles, sub / "candles.csv")
        written[f"{kind}/activity.csv"] = write_activity(run.activity, sub / "activity.csv")
        written[f"{kind}/fills.csv"] = write_fill_log(run.fills, sub / "fills.csv")
        if kind == "vamm":
            dates = [date for date, _ in run.net_liquidity]
            changes = [change for _, change in run.net_liquidity]
            written[f"{kind}/liquidity.csv"] = write_net_liquidity(dates, changes, sub / "liquidity.csv")
            written[f"{kind}/liquidity_distribution.csv"] = write_liquidity_distribution(
                run.distribution or [], sub / "liquidity_distribution.csv"
            )
    manifest = result.manifest()
    manifest["artifacts"] = {name: _sha256(path) for name, path in sorted(written.items())}
    written["manifest.json"] = write_json(manifest, directory / "manifest.json")
    logger.info("wrote %d artifacts to %s", len(written), directory)
    return written


def _run_seed(config: ExperimentConfig, directory: str, seed: int) -> str:
    result = run_experiment(config.with_seed(seed))
    written = write_artifacts(result, Path(directory) / f"seed-{seed}")
    return str(written["manifest.json"])


def run_batch(config: ExperimentConfig, seeds: Sequence[int], directory: PathLike, jobs: int = 1) -> List[Path]:
    """
    One experiment per seed, each in ``directory/seed-<n>``.

    Returns:
        Manifest paths in seed order
    """
    manifests = map_jobs(partial(_run_seed, config, str(directory)), list(seeds), jobs)
    return [Path(path) for path in manifests]
