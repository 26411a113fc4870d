"""Orders and fills shared by every engine."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import InvalidOrderError

POOL_COUNTERPARTY = "pool"


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY

    @property
    def sign(self) -> int:
        return 1 if self is Side.BUY else -1

    @property
    def position_side(self) -> str:
        """Position side a fresh order of this side opens."""
        return "long" if self is Side.BUY else "short"


class OrderKind(str, Enum):
    LIMIT = "limit"
    MARKET = "market"


@dataclass(frozen=True)
class Order:
    """A request to trade ``qty`` base units.

    ``timestamp`` is the exchange's logical clock; it orders resting orders at
    one price level.
    """

    order_id: int
    owner: str
    side: Side
    kind: OrderKind
    qty: float
    price: Optional[float] = None
    leverage: float = 1.0
    timestamp: int = 0
    agent_class: str = ""
    liquidation: bool = False

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "kind", OrderKind(self.kind))
        if not (math.isfinite(self.qty) and self.qty > 0):
            raise InvalidOrderError(f"Order {self.order_id}: quantity must be > 0, got {self.qty!r}")
        if self.kind is OrderKind.LIMIT and not (self.price is not None and math.isfinite(self.price) and self.price > 0):
            raise InvalidOrderError(f"Order {self.order_id}: limit order needs a positive price, got {self.price!r}")
        if not (math.isfinite(self.leverage) and self.leverage > 0):
            raise InvalidOrderError(f"Order {self.order_id}: leverage must be > 0, got {self.leverage!r}")

    @property
    def is_market(self) -> bool:
        return self.kind is OrderKind.MARKET


@dataclass(frozen=True)
class Fill:
    """One execution, seen from the taker (``owner``)."""

    step: int
    order_id: int
    side: Side
    price: float
    qty: float
    owner: str
    counterparty: str = POOL_COUNTERPARTY
    agent_class: str = ""
    liquidation: bool = False
    self_match: bool = False

    @property
    def notional(self) -> float:
        return self.price * self.qty


@dataclass(frozen=True)
class LiquidationEvent:
    """A forced closure.

    ``side`` follows the price-direction convention: an LP liquidated while
    the price rises holds an effective short and is a liquidation on short.
    """

    step: int
    owner: str
    kind: str  # "trader" or "lp"
    side: str  # "long" or "short"
    notional: float
    price: float
    margin_ratio: float
