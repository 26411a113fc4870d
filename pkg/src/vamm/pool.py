"""Constant-product pricing over virtual reserves.

A pool holds a virtual quote reserve ``q_vusdc`` and a virtual base reserve
``q_vbtc``; its price is their ratio. Swap fees are taken from the amount
paid in before it reaches the curve and are kept outside the reserves, so
they never change ``k``.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Tuple

from .errors import EmptyReserveError, NegativeAmountError, PoolDrainError

MAX_FEE_RATE = 0.01


class Direction(str, Enum):
    """Which token is paid into the pool."""

    QUOTE_IN = "quote_in"  # buys base; price rises
    BASE_IN = "base_in"  # sells base; price falls

    @property
    def opposite(self) -> "Direction":
        return Direction.BASE_IN if self is Direction.QUOTE_IN else Direction.QUOTE_IN


@dataclass(frozen=True)
class SwapResult:
    """Amounts of one executed or quoted swap.

    ``amount_in`` includes the fee; ``fee`` is denominated in the input token.
    """

    direction: Direction
    amount_in: float
    amount_out: float
    fee: float
    price_before: float
    price_after: float

    @property
    def average_price(self) -> float:
        """Quote paid or received per base unit, fee included."""
        if self.direction is Direction.QUOTE_IN:
            return self.amount_in / self.amount_out if self.amount_out else self.price_before
        return self.amount_out / self.amount_in if self.amount_in else self.price_before


def _check_fee(fee_rate: float) -> float:
    if not 0.0 <= fee_rate <= MAX_FEE_RATE:
        raise ValueError(f"fee rate must be in [0, {MAX_FEE_RATE}], got {fee_rate!r}")
    return float(fee_rate)


def _check_amount(amount: float, what: str) -> float:
    if not math.isfinite(amount) or amount < 0:
        raise NegativeAmountError(f"{what} must be finite and >= 0, got {amount!r}")
    return float(amount)


class VammPool(ABC):
    """Interface shared by the uniform and the concentrated pool."""

    def __init__(self, fee_rate: float = 0.0):
        self.fee_rate = _check_fee(fee_rate)
        self.fees = {Direction.QUOTE_IN: 0.0, Direction.BASE_IN: 0.0}

    @property
    @abstractmethod
    def q_vusdc(self) -> float:
        """Virtual quote reserve of the active curve."""

    @property
    @abstractmethod
    def q_vbtc(self) -> float:
        """Virtual base reserve of the active curve."""

    @property
    def k(self) -> float:
        return self.q_vusdc * self.q_vbtc

    @property
    def price(self) -> float:
        return pool_price(self)

    @abstractmethod
    def spot_price(self) -> float:
        """Marginal price of the base token in quote units."""

    @abstractmethod
    def quote(self, direction: Direction, amount_in: float) -> SwapResult:
        """Price an exact-input swap without changing the pool."""

    @abstractmethod
    def quote_exact_out(self, direction: Direction, amount_out: float) -> SwapResult:
        """Price an exact-output swap without changing the pool."""

    @abstractmethod
    def quote_for_target_price(self, target: float) -> Tuple[Direction, float]:
        """Direction and fee-inclusive input that move the price to ``target``."""

    @abstractmethod
    def _apply(self, direction: Direction, net_in: float, exact_out: float = None) -> None:
        """Move the reserves by a fee-free input (or to a fee-free output)."""

    @abstractmethod
    def state(self) -> Dict[str, Any]:
        """JSON-ready snapshot for run manifests."""

    def swap(self, direction: Direction, amount_in: float) -> SwapResult:
        """
        Execute an exact-input swap.

        Args:
            direction: Token paid in
            amount_in: Fee-inclusive amount paid in

        Returns:
            The executed SwapResult

        Raises:
            NegativeAmountError: ``amount_in`` is negative
            PoolDrainError: The swap would empty the output reserve
        """
        result = self.quote(direction, amount_in)
        if result.amount_in > 0:
            self._apply(direction, result.amount_in - result.fee)
            self.fees[direction] += result.fee
        return result

    def swap_exact_out(self, direction: Direction, amount_out: float) -> SwapResult:
        """Execute a swap that delivers exactly ``amount_out`` of the output token."""
        result = self.quote_exact_out(direction, amount_out)
        if result.amount_out > 0:
            self._apply(direction, result.amount_in - result.fee, exact_out=result.amount_out)
            self.fees[direction] += result.fee
        return result

    def simulate_swap(self, direction: Direction, amount_in: float) -> float:
        """Output of an exact-input swap, pool untouched."""
        return self.quote(direction, amount_in).amount_out

    def _gross(self, net_in: float) -> Tuple[float, float]:
        gross = net_in / (1.0 - self.fee_rate)
        return gross, gross - net_in


def pool_price(pool: VammPool) -> float:
    """
    USD per base unit, ``q_vusdc / q_vbtc``.

    Raises:
        EmptyReserveError: The base reserve is zero
    """
    return pool.spot_price()


def price_sensitivity(pool: VammPool) -> float:
    """Absolute slope of the price against the base reserve, ``2 k / q_vbtc**3``."""
    q = pool.q_vbtc
    if q <= 0:
        raise EmptyReserveError("Pool base reserve is empty")
    return 2.0 * pool.k / q ** 3


class UniformPool(VammPool):
    """Single constant-product curve over the whole price axis.

    ``k`` is fixed at construction; after each swap the output reserve is
    recomputed as ``k / reserve_in`` so rounding never accumulates in ``k``.
    """

    def __init__(self, q_vusdc: float, q_vbtc: float, fee_rate: float = 0.0):
        super().__init__(fee_rate)
        if not (math.isfinite(q_vbtc) and q_vbtc > 0):
            raise EmptyReserveError(f"Base reserve must be > 0, got {q_vbtc!r}")
        if not (math.isfinite(q_vusdc) and q_vusdc > 0):
            raise EmptyReserveError(f"Quote reserve must be > 0, got {q_vusdc!r}")
        self._q_vusdc = float(q_vusdc)
        self._q_vbtc = float(q_vbtc)
        self._k = self._q_vusdc * self._q_vbtc

    @classmethod
    def from_price(cls, price: float, q_vbtc: float, fee_rate: float = 0.0) -> "UniformPool":
        return cls(price * q_vbtc, q_vbtc, fee_rate)

    @property
    def q_vusdc(self) -> float:
        return self._q_vusdc

    @property
    def q_vbtc(self) -> float:
        return self._q_vbtc

    @property
    def k(self) -> float:
        return self._k

    def spot_price(self) -> float:
        if self._q_vbtc <= 0:
            raise EmptyReserveError("Pool base reserve is empty")
        return self._q_vusdc / self._q_vbtc

    def _reserves(self, direction: Direction) -> Tuple[float, float]:
        if direction is Direction.QUOTE_IN:
            return self._q_vusdc, self._q_vbtc
        return self._q_vbtc, self._q_vusdc

    def quote(self, direction: Direction, amount_in: float) -> SwapResult:
        amount_in = _check_amount(amount_in, "amount-in")
        price = self.price
        if amount_in == 0:
            return SwapResult(direction, 0.0, 0.0, 0.0, price, price)
        fee = amount_in * self.fee_rate
        reserve_in, reserve_out = self._reserves(direction)
        new_in = reserve_in + (amount_in - fee)
        new_out = self._k / new_in
        out = reserve_out - new_out
        if not (new_out > 0 and out < reserve_out):
            raise PoolDrainError(f"Swap of {amount_in!r} would drain the pool")
        after = new_in / new_out if direction is Direction.QUOTE_IN else new_out / new_in
        return SwapResult(direction, amount_in, out, fee, price, after)

    def quote_exact_out(self, direction: Direction, amount_out: float) -> SwapResult:
        amount_out = _check_amount(amount_out, "amount-out")
        price = self.price
        if amount_out == 0:
            return SwapResult(direction, 0.0, 0.0, 0.0, price, price)
        reserve_in, reserve_out = self._reserves(direction)
        if amount_out >= reserve_out:
            raise PoolDrainError(f"Cannot take {amount_out!r} from a reserve of {reserve_out!r}")
        new_out = reserve_out - amount_out
        new_in = self._k / new_out
        gross, fee = self._gross(new_in - reserve_in)
        after = new_in / new_out if direction is Direction.QUOTE_IN else new_out / new_in
        return SwapResult(direction, gross, amount_out, fee, price, after)

    def quote_for_target_price(self, target: float) -> Tuple[Direction, float]:
        if not (math.isfinite(target) and target > 0):
            raise ValueError(f"target price must be > 0, got {target!r}")
        price = self.price
        if target > price:
            gross, _ = self._gross(max(math.sqrt(self._k * target) - self._q_vusdc, 0.0))
            return Direction.QUOTE_IN, gross
        if target < price:
            gross, _ = self._gross(max(math.sqrt(self._k / target) - self._q_vbtc, 0.0))
            return Direction.BASE_IN, gross
        return Direction.QUOTE_IN, 0.0

    def _apply(self, direction: Direction, net_in: float, exact_out: float = None) -> None:
        reserve_in, reserve_out = self._reserves(direction)
        if exact_out is None:
            new_in = reserve_in + net_in
            new_out = self._k / new_in
        else:
            new_out = reserve_out - exact_out
            new_in = self._k / new_out
        if direction is Direction.QUOTE_IN:
            self._q_vusdc, self._q_vbtc = new_in, new_out
        else:
            self._q_vbtc, self._q_vusdc = new_in, new_out

    def state(self) -> Dict[str, Any]:
        return {
            "kind": "uniform",
            "q_vusdc": self._q_vusdc,
            "q_vbtc": self._q_vbtc,
            "k": self._k,
            "fee_rate": self.fee_rate,
        }
