"""Trader populations and their per-step behaviour.

Every class draws from its own random stream, seeded with ``[seed, class id]``,
so adding or resizing one class never changes another class's draws. Each
group draws a fixed number of variates per step whatever the market looks
like; only the decisions taken from them depend on the market view.

Behaviour per class:

* informed: observe the next fundamental price with noise. On an order book
  they quote both sides around that signal, throttled to a band around the
  current price; elsewhere they take a full position when the signal leaves
  the band and flatten when it returns.
* uninformed: trade with a size proportional to trailing volatility, lean
  towards the last move and scale longs up after positive returns.
* hedger: hold a fixed USD hedge and rebalance to it on a fixed period.
* speculator: re-draw a random position, more often after large price shocks.
* arbitrageur: push a VAMM pool back within a premium band of the spot price.
* liquidity_provider: open leveraged concentrated-liquidity ranges around the
  pool price, more often after up days, and withdraw them after a lifetime.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import MarginCheckError
from ..exchanges.base import Exchange
from ..exchanges.errors import ExchangeError
from ..exchanges.orders import Fill, Order, Side
from ..vamm.clearing_house import LP_AGENT_CLASS
from ..vamm.concentrated import ConcentratedPool, LiquidityPosition, amounts_for_liquidity, snap_tick, sqrt_price_at
from ..vamm.errors import InvertedRangeError, PoolDrainError
from ..vamm.pool import Direction

logger = logging.getLogger(__name__)

INFORMED = "informed"
UNINFORMED = "uninformed"
HEDGER = "hedger"
SPECULATOR = "speculator"
ARBITRAGEUR = "arbitrageur"
LIQUIDITY_PROVIDER = LP_AGENT_CLASS

# Stream ids; 0 belongs to the price path.
CLASS_IDS: Dict[str, int] = {
    INFORMED: 1,
    UNINFORMED: 2,
    HEDGER: 3,
    SPECULATOR: 4,
    ARBITRAGEUR: 5,
    LIQUIDITY_PROVIDER: 6,
}

# Orders below this notional (USD) are not worth sending.
MIN_NOTIONAL = 1e-6
PRICE_DECIMALS = 2

REJECTIONS = (ExchangeError, MarginCheckError, PoolDrainError, InvertedRangeError)


@dataclass(frozen=True)
class TraderSpec:
    """One trader class and its population.

    Only the parameters of the class's own behaviour are read; the rest keep
    their defaults.
    """

    agent_class: str
    count: int = 0
    wealth: float = 100_000.0
    wealth_dispersion: float = 0.5
    leverage: float = 1.0
    activity: float = 0.1
    precision: float = 500.0
    band: float = 0.005
    spread: float = 0.001
    vol_gain: float = 5.0
    trend_bias: float = 0.1
    overreaction: float = 1.0
    exit_rate: float = 0.05
    rebalance_period: int = 7
    hedge_ratio: float = 0.5
    short_share: float = 0.7
    shock_gain: float = 1.0
    lifetime: int = 14
    range_width: float = 0.2
    rise_boost: float = 1.0

    def __post_init__(self):
        if self.agent_class not in CLASS_IDS:
            raise ValueError(f"Unknown trader class {self.agent_class!r} (expected one of: {', '.join(CLASS_IDS)})")
        if self.count < 0:
            raise ValueError(f"{self.agent_class}: count must be >= 0, got {self.count!r}")
        if self.overreaction < 1:
            raise ValueError(f"{self.agent_class}: overreaction multiplier must be >= 1, got {self.overreaction!r}")
        if not self.wealth > 0 or self.wealth_dispersion < 0:
            raise ValueError(f"{self.agent_class}: wealth must be > 0 and its dispersion >= 0")
        if self.leverage < 1:
            raise ValueError(f"{self.agent_class}: leverage must be >= 1, got {self.leverage!r}")
        for name in ("activity", "exit_rate", "short_share"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{self.agent_class}: {name} must be in [0, 1], got {value!r}")
        if self.rebalance_period < 1 or self.lifetime < 1:
            raise ValueError(f"{self.agent_class}: rebalance period and lifetime must be >= 1 day")
        if not self.precision > 0 or self.band < 0 or self.spread < 0 or self.range_width <= 0:
            raise ValueError(f"{self.agent_class}: precision and range width must be > 0, band and spread >= 0")


@dataclass(frozen=True)
class MarketView:
    """What traders see at one trading step.

    ``outlook`` is the fundamental price at the next trading step; only
    informed traders read it. ``trailing_vol`` is the daily-scaled standard
    deviation of recent fundamental log returns and ``shock`` the last
    fundamental move in units of its expected standard deviation.
    """

    step: int
    day: int
    step_in_day: int
    mark: float
    fundamental: float
    outlook: float
    last_return: float = 0.0
    day_return: float = 0.0
    trailing_vol: float = 0.0
    shock: float = 0.0


@dataclass
class Trader:
    owner: str
    wealth: float
    leverage: float
    hedge: float = 0.0
    ranges: List[Tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True)
class OrderIntent:
    owner: str
    side: Side
    qty: float
    price: Optional[float] = None
    leverage: float = 1.0


@dataclass(frozen=True)
class CloseIntent:
    owner: str


@dataclass(frozen=True)
class CancelIntent:
    owner: str


@dataclass(frozen=True)
class TargetPriceIntent:
    """Trade against the pool until its price reaches ``target``."""

    owner: str
    target: float
    leverage: float = 1.0


@dataclass(frozen=True)
class LiquidityIntent:
    owner: str
    price_lower: float
    price_upper: float
    value: float
    leverage: float = 1.0


@dataclass(frozen=True)
class WithdrawIntent:
    owner: str
    position_id: int


Intent = Union[OrderIntent, CloseIntent, CancelIntent, TargetPriceIntent, LiquidityIntent, WithdrawIntent]


@dataclass(frozen=True)
class Rejection:
    step: int
    owner: str
    agent_class: str
    reason: str


@dataclass
class StepReport:
    """Everything step_agents sent to the engine during one step."""

    orders: List[Order] = field(default_factory=list)
    fills: List[Fill] = field(default_factory=list)
    rejections: List[Rejection] = field(default_factory=list)
    positions: List[LiquidityPosition] = field(default_factory=list)


def _rebalance(trader: Trader, target: float, exchange: Exchange, mark: float) -> List[Intent]:
    """Order moving the trader's position to ``target`` base units."""
    diff = target - exchange.position(trader.owner)
    if abs(diff) * mark <= MIN_NOTIONAL:
        return []
    side = Side.BUY if diff > 0 else Side.SELL
    return [OrderIntent(trader.owner, side, abs(diff), leverage=min(trader.leverage, exchange.max_leverage))]


class TraderGroup(ABC):
    """A population of one class sharing one random stream."""

    agent_class: str = ""
    # Groups flagged here act after the step's risk sweep.
    after_risk = False

    def __init__(self, spec: TraderSpec, seed: int):
        if spec.agent_class != self.agent_class:
            raise ValueError(f"{type(self).__name__} needs a {self.agent_class} spec, got {spec.agent_class}")
        self.spec = spec
        self.rng = np.random.default_rng([seed, CLASS_IDS[self.agent_class]])
        spread = spec.wealth_dispersion
        wealth = spec.wealth * self.rng.lognormal(-0.5 * spread * spread, spread, spec.count)
        leverage = self.rng.uniform(1.0, spec.leverage, spec.count)
        self.traders = [
            Trader(f"{self.agent_class}-{index:04d}", float(w), float(lev))
            for index, (w, lev) in enumerate(zip(wealth, leverage))
        ]

    def __len__(self) -> int:
        return len(self.traders)

    def leverage(self, trader: Trader, exchange: Exchange) -> float:
        return min(trader.leverage, exchange.max_leverage)

    @abstractmethod
    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        """Intents of every trader of the group for this step."""

    def acknowledge(self, intent: Intent, outcome, view: MarketView) -> None:
        """Hook called with the result of each executed intent."""


class InformedGroup(TraderGroup):
    agent_class = INFORMED

    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        noise = self.rng.standard_normal(len(self.traders))
        signals = view.outlook * np.exp(noise / self.spec.precision)
        if exchange.kind == "cex":
            return self._quote(view, exchange, signals)
        intents: List[Intent] = []
        for trader, signal in zip(self.traders, signals):
            gap = math.log(signal / view.mark)
            target = 0.0
            if abs(gap) > self.spec.band:
                target = math.copysign(trader.wealth * self.leverage(trader, exchange) / view.mark, gap)
            intents.extend(_rebalance(trader, target, exchange, view.mark))
        return intents

    def _quote(self, view: MarketView, exchange: Exchange, signals: np.ndarray) -> List[Intent]:
        band, spread = self.spec.band, self.spec.spread
        low, high = view.mark * (1 - band), view.mark * (1 + band)
        intents: List[Intent] = []
        for trader, signal in zip(self.traders, signals):
            inventory = exchange.position(trader.owner) * view.mark / trader.wealth
            center = min(max(float(signal), low), high) * math.exp(-band * max(-1.0, min(1.0, inventory)))
            qty = trader.wealth * self.spec.activity / center
            leverage = self.leverage(trader, exchange)
            intents.append(CancelIntent(trader.owner))
            intents.append(OrderIntent(trader.owner, Side.BUY, qty, round(center * (1 - spread), PRICE_DECIMALS), leverage))
            intents.append(OrderIntent(trader.owner, Side.SELL, qty, round(center * (1 + spread), PRICE_DECIMALS), leverage))
        return intents


class UninformedGroup(TraderGroup):
    agent_class = UNINFORMED

    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        draws = self.rng.random((len(self.traders), 3))
        follow = 0.5 + self.spec.trend_bias * float(np.sign(view.last_return))
        intents: List[Intent] = []
        for trader, (u_exit, u_act, u_side) in zip(self.traders, draws):
            if exchange.position(trader.owner) != 0 and u_exit < self.spec.exit_rate:
                intents.append(CloseIntent(trader.owner))
                continue
            if u_act >= self.spec.activity:
                continue
            side = Side.BUY if u_side < follow else Side.SELL
            notional = trader.wealth * self.spec.vol_gain * view.trailing_vol
            if side is Side.BUY and view.last_return > 0:
                notional *= self.spec.overreaction
            if notional <= MIN_NOTIONAL:
                continue
            intents.append(OrderIntent(trader.owner, side, notional / view.mark, leverage=self.leverage(trader, exchange)))
        return intents


class HedgerGroup(TraderGroup):
    agent_class = HEDGER

    def __init__(self, spec: TraderSpec, seed: int):
        super().__init__(spec, seed)
        shorts = self.rng.random(len(self.traders)) < spec.short_share
        for trader, short in zip(self.traders, shorts):
            trader.hedge = (-1.0 if short else 1.0) * spec.hedge_ratio * trader.wealth * trader.leverage

    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        if view.step_in_day != 0:
            return []
        intents: List[Intent] = []
        for index, trader in enumerate(self.traders):
            if (view.day + index) % self.spec.rebalance_period:
                continue
            intents.extend(_rebalance(trader, trader.hedge / view.mark, exchange, view.mark))
        return intents


class SpeculatorGroup(TraderGroup):
    agent_class = SPECULATOR

    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        draws = self.rng.random((len(self.traders), 3))
        rate = min(1.0, self.spec.activity * (1.0 + self.spec.shock_gain * view.shock))
        intents: List[Intent] = []
        for trader, (u_act, u_side, u_size) in zip(self.traders, draws):
            if u_act >= rate:
                continue
            direction = 1.0 if u_side < 0.5 else -1.0
            target = direction * trader.wealth * self.leverage(trader, exchange) * (0.5 + 0.5 * u_size) / view.mark
            intents.extend(_rebalance(trader, target, exchange, view.mark))
        return intents


class ArbitrageurGroup(TraderGroup):
    agent_class = ARBITRAGEUR
    after_risk = True

    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        if exchange.kind != "vamm" or not self.traders:
            return []
        band = self.spec.band
        ratio = view.mark / view.fundamental
        if ratio > 1 + band:
            target = view.fundamental * (1 + band)
        elif ratio < 1 - band:
            target = view.fundamental * (1 - band)
        else:
            return []
        trader = self.traders[view.step % len(self.traders)]
        return [TargetPriceIntent(trader.owner, target, self.leverage(trader, exchange))]


class LiquidityProviderGroup(TraderGroup):
    agent_class = LIQUIDITY_PROVIDER

    def decide(self, view: MarketView, exchange: Exchange) -> List[Intent]:
        pool = getattr(exchange, "pool", None)
        if not isinstance(pool, ConcentratedPool) or not self.traders:
            return []
        intents: List[Intent] = []
        for trader in self.traders:
            kept = []
            for position_id, expiry in trader.ranges:
                if position_id not in pool.positions:
                    continue
                if view.day >= expiry:
                    intents.append(WithdrawIntent(trader.owner, position_id))
                else:
                    kept.append((position_id, expiry))
            trader.ranges = kept
        if view.step_in_day != 0:
            return intents

        draws = self.rng.random((len(self.traders), 3))
        rate = self.spec.activity * ((1.0 + self.spec.rise_boost) if view.day_return > 0 else 1.0)
        for trader, (u_act, u_width, u_value) in zip(self.traders, draws):
            if u_act >= min(rate, 1.0):
                continue
            half_width = self.spec.range_width * (0.25 + 0.75 * u_width)
            leverage = trader.leverage
            value = trader.wealth * (0.2 + 0.8 * u_value) * leverage
            intents.append(
                LiquidityIntent(
                    trader.owner, view.mark * math.exp(-half_width), view.mark * math.exp(half_width), value, leverage
                )
            )
        return intents

    def acknowledge(self, intent: Intent, outcome, view: MarketView) -> None:
        if isinstance(intent, LiquidityIntent) and isinstance(outcome, LiquidityPosition):
            trader = next(t for t in self.traders if t.owner == intent.owner)
            trader.ranges.append((outcome.position_id, view.day + self.spec.lifetime))


GROUPS = {
    group.agent_class: group
    for group in (
        InformedGroup,
        UninformedGroup,
        HedgerGroup,
        SpeculatorGroup,
        ArbitrageurGroup,
        LiquidityProviderGroup,
    )
}


def build_population(specs: Sequence[TraderSpec], seed: int) -> List[TraderGroup]:
    """
    Instantiate one group per spec, in the order given.

    Args:
        specs: Trader classes; a class may appear at most once
        seed: Experiment seed

    Returns:
        Groups ready for :func:`step_agents`
    """
    seen = set()
    groups = []
    for spec in specs:
        if spec.agent_class in seen:
            raise ValueError(f"trader class {spec.agent_class!r} listed twice")
        seen.add(spec.agent_class)
        groups.append(GROUPS[spec.agent_class](spec, seed))
    return groups


def _liquidity_for_value(pool: ConcentratedPool, intent: LiquidityIntent) -> Tuple[float, float, float]:
    """Snapped range and the liquidity whose deposit is worth ``intent.value`` at the pool price."""
    lower = sqrt_price_at(snap_tick(intent.price_lower, pool.tick_spacing))
    upper = sqrt_price_at(snap_tick(intent.price_upper, pool.tick_spacing))
    if lower >= upper:
        raise InvertedRangeError(f"range [{intent.price_lower:.6g}, {intent.price_upper:.6g}] narrower than one tick spacing")
    price = pool.spot_price()
    base, quote = amounts_for_liquidity(1.0, math.sqrt(price), lower, upper)
    return lower * lower, upper * upper, intent.value / (base * price + quote)


def _execute(intent: Intent, group: TraderGroup, exchange: Exchange, report: StepReport):
    if isinstance(intent, OrderIntent):
        order = exchange.new_order(
            intent.owner, intent.side, intent.qty, intent.price, intent.leverage, agent_class=group.agent_class
        )
        report.orders.append(order)
        fills = exchange.submit(order)
        report.fills.extend(fills)
        return fills
    if isinstance(intent, CloseIntent):
        fills = exchange.close(intent.owner)
        report.fills.extend(fills)
        return fills
    if isinstance(intent, CancelIntent):
        return exchange.cancel_owner(intent.owner)
    if isinstance(intent, TargetPriceIntent):
        house = exchange.house
        direction, gross = house.pool.quote_for_target_price(intent.target)
        if gross <= 0:
            return None
        if direction is Direction.QUOTE_IN:
            side, notional = Side.BUY, gross
        else:
            side, notional = Side.SELL, house.pool.quote(Direction.BASE_IN, gross).amount_out
        fill = house.open_position(intent.owner, side, notional / intent.leverage, intent.leverage, group.agent_class)
        report.fills.append(fill)
        return fill
    if isinstance(intent, LiquidityIntent):
        house = exchange.house
        low, high, liquidity = _liquidity_for_value(house.pool, intent)
        position = house.add_liquidity(intent.owner, low, high, liquidity=liquidity, leverage=intent.leverage)
        report.positions.append(position)
        return position
    if isinstance(intent, WithdrawIntent):
        before = len(exchange.fills)
        position = exchange.house.remove_liquidity(intent.position_id)
        report.fills.extend(exchange.fills[before:])
        return position
    raise TypeError(f"unknown intent {intent!r}")


def step_agents(groups: Sequence[TraderGroup], view: MarketView, exchange: Exchange) -> StepReport:
    """
    Let every group decide and send its intents to the engine, group by group.

    Rejected intents (empty book, margin check, pool capacity, pool drain)
    are recorded in the report and do not stop the step.

    Args:
        groups: Trader groups, in acting order
        view: Market view of this step
        exchange: Engine receiving the orders

    Returns:
        Orders sent, fills received, rejections and new LP positions
    """
    report = StepReport()
    for group in groups:
        for intent in group.decide(view, exchange):
            try:
                outcome = _execute(intent, group, exchange, report)
            except REJECTIONS as exc:
                report.rejections.append(Rejection(view.step, intent.owner, group.agent_class, str(exc)))
                logger.debug("step %d: %s rejected: %s", view.step, intent.owner, exc)
                continue
            group.acknowledge(intent, outcome, view)
    return report
