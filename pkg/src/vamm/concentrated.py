"""Concentrated liquidity: tick-ranged positions over one constant-product curve.

Prices live on the geometric tick grid ``1.0001**i``; positions are snapped to
multiples of the tick spacing. Between two initialized ticks the pool is a
constant-product curve with ``k = L**2`` on the virtual reserves
``(L / sqrt(P), L * sqrt(P))``; a swap walks these segments and adjusts the
active liquidity ``L`` whenever it crosses a position boundary.

A position with range ``[P_A, P_B]`` holds real reserves equal to its virtual
reserves shifted by the base reserve at corner B and the quote reserve at
corner A.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from sortedcontainers import SortedDict

from .errors import (
    InconsistentAmountsError,
    InvertedRangeError,
    NegativeAmountError,
    PoolDrainError,
    UnknownPositionError,
)
from .pool import Direction, SwapResult, VammPool, _check_amount

TICK_BASE = 1.0001
LOG_TICK_BASE = math.log(TICK_BASE)
DEFAULT_TICK_SPACING = 60
AMOUNT_RTOL = 1e-6
# Fraction of a budget left over from rounding that counts as fully spent.
RESIDUAL_RTOL = 1e-12


def sqrt_price_at(tick: int) -> float:
    return math.exp(tick * LOG_TICK_BASE / 2.0)


def tick_at(sqrt_price: float) -> int:
    """Largest tick whose price does not exceed ``sqrt_price**2``."""
    tick = math.floor(2.0 * math.log(sqrt_price) / LOG_TICK_BASE)
    while sqrt_price_at(tick + 1) <= sqrt_price:
        tick += 1
    while sqrt_price_at(tick) > sqrt_price:
        tick -= 1
    return tick


def snap_tick(price: float, spacing: int) -> int:
    """Nearest usable tick (a multiple of ``spacing``) to ``price``."""
    return int(round(math.log(price) / LOG_TICK_BASE / spacing)) * spacing


def liquidity_for_amounts(
    base: float, quote: float, sqrt_price: float, sqrt_lower: float, sqrt_upper: float
) -> float:
    """
    Liquidity bought by depositing ``base`` and ``quote`` at ``sqrt_price``.

    Raises:
        InconsistentAmountsError: The two amounts imply different liquidity, or
            the side the range needs at this price is missing
    """
    if sqrt_price <= sqrt_lower:
        if base <= 0:
            raise InconsistentAmountsError("A range above the current price needs a base deposit")
        return base * sqrt_lower * sqrt_upper / (sqrt_upper - sqrt_lower)
    if sqrt_price >= sqrt_upper:
        if quote <= 0:
            raise InconsistentAmountsError("A range below the current price needs a quote deposit")
        return quote / (sqrt_upper - sqrt_lower)
    from_base = base * sqrt_price * sqrt_upper / (sqrt_upper - sqrt_price)
    from_quote = quote / (sqrt_price - sqrt_lower)
    if from_base <= 0 or from_quote <= 0:
        raise InconsistentAmountsError("An in-range deposit needs both base and quote")
    if abs(from_base - from_quote) > AMOUNT_RTOL * max(from_base, from_quote):
        raise InconsistentAmountsError(
            f"Deposit of {base!r} base and {quote!r} quote does not match the pool composition "
            f"(liquidity {from_base:.6g} vs {from_quote:.6g})"
        )
    return min(from_base, from_quote)


def amounts_for_liquidity(
    liquidity: float, sqrt_price: float, sqrt_lower: float, sqrt_upper: float
) -> Tuple[float, float]:
    """Real (base, quote) reserves of ``liquidity`` on ``[lower, upper]`` at ``sqrt_price``."""
    clamped = min(max(sqrt_price, sqrt_lower), sqrt_upper)
    return liquidity * (1.0 / clamped - 1.0 / sqrt_upper), liquidity * (clamped - sqrt_lower)


@dataclass(frozen=True)
class LiquidityPosition:
    """One LP's liquidity on a tick range.

    ``deposit_base``/``deposit_quote`` are the virtual tokens minted for the
    position at opening; the LP owes them back, so the position's profit is
    its current value less the value of that deposit.
    """

    position_id: int
    owner: str
    tick_lower: int
    tick_upper: int
    liquidity: float
    leverage: float = 1.0
    collateral: float = 0.0
    deposit_base: float = 0.0
    deposit_quote: float = 0.0
    opened_step: int = 0

    @property
    def sqrt_lower(self) -> float:
        return sqrt_price_at(self.tick_lower)

    @property
    def sqrt_upper(self) -> float:
        return sqrt_price_at(self.tick_upper)

    @property
    def price_lower(self) -> float:
        return self.sqrt_lower ** 2

    @property
    def price_upper(self) -> float:
        return self.sqrt_upper ** 2

    @property
    def corner_a(self) -> Tuple[float, float]:
        """Virtual (base, quote) reserves where the price reaches ``P_A``."""
        return self.liquidity / self.sqrt_lower, self.liquidity * self.sqrt_lower

    @property
    def corner_b(self) -> Tuple[float, float]:
        """Virtual (base, quote) reserves where the price reaches ``P_B``."""
        return self.liquidity / self.sqrt_upper, self.liquidity * self.sqrt_upper

    def to_real(self, virtual: Tuple[float, float]) -> Tuple[float, float]:
        return virtual[0] - self.corner_b[0], virtual[1] - self.corner_a[1]

    def to_virtual(self, real: Tuple[float, float]) -> Tuple[float, float]:
        return real[0] + self.corner_b[0], real[1] + self.corner_a[1]

    def in_range(self, tick: int) -> bool:
        return self.tick_lower <= tick < self.tick_upper

    def reserves(self, sqrt_price: float) -> Tuple[float, float]:
        """Real (base, quote) reserves at ``sqrt_price``."""
        return amounts_for_liquidity(self.liquidity, sqrt_price, self.sqrt_lower, self.sqrt_upper)

    def value(self, price: float) -> float:
        base, quote = self.reserves(math.sqrt(price))
        return base * price + quote

    def deposit_value(self, price: float) -> float:
        return self.deposit_base * price + self.deposit_quote

    def net_base(self, price: float) -> float:
        """Base held beyond what was minted; negative means the LP is effectively short."""
        return self.reserves(math.sqrt(price))[0] - self.deposit_base

    def margin_ratio(self, price: float) -> float:
        """Equity over the deposit's value: ``(collateral + value - deposit value) / deposit value``."""
        owed = self.deposit_value(price)
        if owed <= 0:
            return math.inf
        return (self.collateral + self.value(price) - owed) / owed


@dataclass
class _Walk:
    sqrt_price: float
    liquidity: float
    tick: int
    amount_in: float = 0.0
    amount_out: float = 0.0


class ConcentratedPool(VammPool):
    """Pool whose liquidity is the sum of tick-ranged positions."""

    def __init__(self, price: float, fee_rate: float = 0.0, tick_spacing: int = DEFAULT_TICK_SPACING):
        super().__init__(fee_rate)
        if not (math.isfinite(price) and price > 0):
            raise ValueError(f"initial price must be > 0, got {price!r}")
        if tick_spacing < 1:
            raise ValueError(f"tick spacing must be >= 1, got {tick_spacing!r}")
        self.tick_spacing = int(tick_spacing)
        self._sqrt_price = math.sqrt(price)
        self._tick = tick_at(self._sqrt_price)
        self._liquidity = 0.0
        self._ticks: SortedDict = SortedDict()
        self._tick_refs: Counter = Counter()
        self.positions: Dict[int, LiquidityPosition] = {}
        self._next_id = 1

    @property
    def sqrt_price(self) -> float:
        return self._sqrt_price

    @property
    def tick(self) -> int:
        return self._tick

    @property
    def liquidity(self) -> float:
        """Active liquidity at the current price."""
        return self._liquidity

    @property
    def q_vusdc(self) -> float:
        return self._liquidity * self._sqrt_price

    @property
    def q_vbtc(self) -> float:
        return self._liquidity / self._sqrt_price

    @property
    def k(self) -> float:
        return self._liquidity ** 2

    def spot_price(self) -> float:
        return self._sqrt_price ** 2

    def initialized_ticks(self) -> List[int]:
        return list(self._ticks.keys())

    # -- liquidity --------------------------------------------------------

    def add_liquidity(
        self,
        owner: str,
        price_lower: float,
        price_upper: float,
        *,
        liquidity: Optional[float] = None,
        amounts: Optional[Tuple[float, float]] = None,
        leverage: float = 1.0,
        step: int = 0,
    ) -> LiquidityPosition:
        """
        Open a position on ``[price_lower, price_upper]``.

        Give either ``liquidity`` or the deposited ``amounts`` as (base, quote).

        Args:
            owner: LP identifier
            price_lower: P_A
            price_upper: P_B
            liquidity: Liquidity to add
            amounts: Virtual tokens to deposit
            leverage: Deposit value over posted collateral (>= 1)
            step: Simulation step, recorded on the position

        Returns:
            The recorded LiquidityPosition

        Raises:
            InvertedRangeError: ``price_lower >= price_upper``
            InconsistentAmountsError: Amounts do not match the in-range composition
        """
        if not (price_lower > 0 and price_upper > 0 and price_lower < price_upper):
            raise InvertedRangeError(f"Price range [{price_lower!r}, {price_upper!r}] is empty or inverted")
        if (liquidity is None) == (amounts is None):
            raise ValueError("give exactly one of liquidity or amounts")
        if leverage < 1:
            raise ValueError(f"leverage must be >= 1, got {leverage!r}")

        tick_lower = snap_tick(price_lower, self.tick_spacing)
        tick_upper = snap_tick(price_upper, self.tick_spacing)
        if tick_upper <= tick_lower:
            tick_upper = tick_lower + self.tick_spacing
        sqrt_lower, sqrt_upper = sqrt_price_at(tick_lower), sqrt_price_at(tick_upper)

        if amounts is not None:
            base = _check_amount(amounts[0], "base amount")
            quote = _check_amount(amounts[1], "quote amount")
            liquidity = liquidity_for_amounts(base, quote, self._sqrt_price, sqrt_lower, sqrt_upper)
        elif not (math.isfinite(liquidity) and liquidity > 0):
            raise NegativeAmountError(f"liquidity must be > 0, got {liquidity!r}")

        deposit_base, deposit_quote = amounts_for_liquidity(liquidity, self._sqrt_price, sqrt_lower, sqrt_upper)
        price = self.spot_price()
        position = LiquidityPosition(
            position_id=self._next_id,
            owner=owner,
            tick_lower=tick_lower,
            tick_upper=tick_upper,
            liquidity=float(liquidity),
            leverage=float(leverage),
            collateral=(deposit_base * price + deposit_quote) / leverage,
            deposit_base=deposit_base,
            deposit_quote=deposit_quote,
            opened_step=step,
        )
        self._next_id += 1
        self.positions[position.position_id] = position
        self._mark_tick(tick_lower, position.liquidity)
        self._mark_tick(tick_upper, -position.liquidity)
        self._liquidity = self._active_liquidity()
        return position

    def remove_liquidity(self, position_id: int) -> Tuple[LiquidityPosition, float, float]:
        """
        Withdraw a position.

        Returns:
            The removed position and its real (base, quote) reserves at the current price

        Raises:
            UnknownPositionError: No position has ``position_id``
        """
        position = self.positions.pop(position_id, None)
        if position is None:
            raise UnknownPositionError(f"No liquidity position with id {position_id}")
        self._unmark_tick(position.tick_lower, position.liquidity)
        self._unmark_tick(position.tick_upper, -position.liquidity)
        self._liquidity = self._active_liquidity()
        base, quote = position.reserves(self._sqrt_price)
        return position, base, quote

    def _mark_tick(self, tick: int, delta: float) -> None:
        self._ticks[tick] = self._ticks.get(tick, 0.0) + delta
        self._tick_refs[tick] += 1

    def _unmark_tick(self, tick: int, delta: float) -> None:
        self._tick_refs[tick] -= 1
        if self._tick_refs[tick] <= 0:
            del self._tick_refs[tick]
            del self._ticks[tick]
        else:
            self._ticks[tick] -= delta

    def _active_liquidity(self, tick: Optional[int] = None) -> float:
        tick = self._tick if tick is None else tick
        return math.fsum(p.liquidity for p in self.positions.values() if p.in_range(tick))

    # -- swaps --------------------------------------------------------------

    def _next_tick(self, tick: int, up: bool) -> Optional[int]:
        index = self._ticks.bisect_right(tick)
        if up:
            return self._ticks.keys()[index] if index < len(self._ticks) else None
        return self._ticks.keys()[index - 1] if index > 0 else None

    @staticmethod
    def _segment(liquidity: float, start: float, end: float, up: bool) -> Tuple[float, float]:
        """Input and output of moving the square-root price from ``start`` to ``end``."""
        if up:
            amount_in = math.inf if math.isinf(end) else liquidity * (end - start)
            return amount_in, liquidity * (1.0 / start - (0.0 if math.isinf(end) else 1.0 / end))
        amount_in = math.inf if end == 0 else liquidity * (1.0 / end - 1.0 / start)
        return amount_in, liquidity * (start - end)

    def _walk(
        self,
        direction: Direction,
        budget_in: float = math.inf,
        budget_out: float = math.inf,
        sqrt_limit: Optional[float] = None,
    ) -> _Walk:
        up = direction is Direction.QUOTE_IN
        walk = _Walk(self._sqrt_price, self._liquidity, self._tick)
        while True:
            left_in = budget_in - walk.amount_in
            left_out = budget_out - walk.amount_out
            if math.isfinite(budget_in) and left_in <= RESIDUAL_RTOL * budget_in:
                break
            if math.isfinite(budget_out) and left_out <= RESIDUAL_RTOL * budget_out:
                break
            nxt = self._next_tick(walk.tick, up)
            boundary = (math.inf if up else 0.0) if nxt is None else sqrt_price_at(nxt)
            at_limit = False
            if sqrt_limit is not None and (boundary >= sqrt_limit if up else boundary <= sqrt_limit):
                boundary, at_limit = sqrt_limit, True

            if walk.liquidity > 0:
                seg_in, seg_out = self._segment(walk.liquidity, walk.sqrt_price, boundary, up)
                stop = None
                if math.isfinite(left_in) and seg_in >= left_in:
                    if up:
                        stop = walk.sqrt_price + left_in / walk.liquidity
                    else:
                        stop = 1.0 / (1.0 / walk.sqrt_price + left_in / walk.liquidity)
                elif math.isfinite(left_out) and seg_out > left_out:
                    if up:
                        stop = 1.0 / (1.0 / walk.sqrt_price - left_out / walk.liquidity)
                    else:
                        stop = walk.sqrt_price - left_out / walk.liquidity
                if stop is not None:
                    seg_in, seg_out = self._segment(walk.liquidity, walk.sqrt_price, stop, up)
                    walk.amount_in += seg_in
                    walk.amount_out += seg_out
                    walk.tick = self._settle_tick(stop, walk.tick, nxt, up)
                    walk.sqrt_price = stop
                    break
                walk.amount_in += seg_in
                walk.amount_out += seg_out

            if at_limit:
                walk.tick = self._settle_tick(boundary, walk.tick, nxt, up)
                walk.sqrt_price = boundary
                break
            if nxt is None:
                raise PoolDrainError(f"Swap {direction.value} runs past the last initialized tick")
            walk.sqrt_price = boundary
            walk.tick = nxt if up else nxt - 1
            walk.liquidity = self._active_liquidity(walk.tick)
        return walk

    @staticmethod
    def _settle_tick(sqrt_price: float, tick: int, nxt: Optional[int], up: bool) -> int:
        """Current tick after stopping inside a segment, kept within that segment."""
        found = tick_at(sqrt_price)
        if up:
            found = max(found, tick)
            return found if nxt is None else min(found, nxt - 1)
        found = min(found, tick)
        return found if nxt is None else max(found, nxt)

    def quote(self, direction: Direction, amount_in: float) -> SwapResult:
        amount_in = _check_amount(amount_in, "amount-in")
        price = self.spot_price()
        if amount_in == 0:
            return SwapResult(direction, 0.0, 0.0, 0.0, price, price)
        fee = amount_in * self.fee_rate
        walk = self._walk(direction, budget_in=amount_in - fee)
        return SwapResult(direction, amount_in, walk.amount_out, fee, price, walk.sqrt_price ** 2)

    def quote_exact_out(self, direction: Direction, amount_out: float) -> SwapResult:
        amount_out = _check_amount(amount_out, "amount-out")
        price = self.spot_price()
        if amount_out == 0:
            return SwapResult(direction, 0.0, 0.0, 0.0, price, price)
        walk = self._walk(direction, budget_out=amount_out)
        gross, fee = self._gross(walk.amount_in)
        return SwapResult(direction, gross, amount_out, fee, price, walk.sqrt_price ** 2)

    def quote_for_target_price(self, target: float) -> Tuple[Direction, float]:
        if not (math.isfinite(target) and target > 0):
            raise ValueError(f"target price must be > 0, got {target!r}")
        price = self.spot_price()
        if target == price:
            return Direction.QUOTE_IN, 0.0
        direction = Direction.QUOTE_IN if target > price else Direction.BASE_IN
        walk = self._walk(direction, sqrt_limit=math.sqrt(target))
        gross, _ = self._gross(walk.amount_in)
        return direction, gross

    def _apply(self, direction: Direction, net_in: float, exact_out: float = None) -> None:
        if exact_out is None:
            walk = self._walk(direction, budget_in=net_in)
        else:
            walk = self._walk(direction, budget_out=exact_out)
        self._sqrt_price, self._tick, self._liquidity = walk.sqrt_price, walk.tick, walk.liquidity

    def state(self) -> Dict[str, Any]:
        return {
            "kind": "concentrated",
            "price": self.spot_price(),
            "liquidity": self._liquidity,
            "tick": self._tick,
            "tick_spacing": self.tick_spacing,
            "fee_rate": self.fee_rate,
            "positions": [
                {
                    "id": p.position_id,
                    "owner": p.owner,
                    "price_lower": p.price_lower,
                    "price_upper": p.price_upper,
                    "liquidity": p.liquidity,
                    "leverage": p.leverage,
                }
                for p in self.positions.values()
            ],
        }
