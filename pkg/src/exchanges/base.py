"""Common exchange interface.

Every engine combines the four roles of a perpetual-futures venue: custody
(accounts holding collateral, modeled as instantaneous balance edits),
matching (``submit``), risk control (``risk_sweep``) and the trader-facing
order surface. Engines are single-writer state machines: callers feed one
ordered stream of events and read aggregates only between steps.
"""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, List, Optional

from ..errors import MarginCheckError
from ..marketdata.accumulator import DailyAccumulator
from ..marketdata.records import ActivityRecord
from ..vamm.accounts import PerpAccount
from ..vamm.clearing_house import DEFAULT_INITIAL_MARGIN, DEFAULT_MAINTENANCE_MARGIN, MARGIN_RTOL
from .orders import Fill, LiquidationEvent, Order, OrderKind, Side

logger = logging.getLogger(__name__)


class Exchange(ABC):
    """Base class of the LOB, oracle and VAMM engines."""

    kind: str = ""

    def __init__(
        self,
        accumulator: DailyAccumulator,
        initial_margin: float = DEFAULT_INITIAL_MARGIN,
        maintenance_margin: float = DEFAULT_MAINTENANCE_MARGIN,
    ):
        if not 0 < maintenance_margin <= initial_margin <= 1:
            raise ValueError(
                f"margins must satisfy 0 < maintenance <= initial <= 1, got {maintenance_margin}, {initial_margin}"
            )
        self.accumulator = accumulator
        self.initial_margin = initial_margin
        self.maintenance_margin = maintenance_margin
        self.accounts: Dict[str, PerpAccount] = {}
        self.fills: List[Fill] = []
        self.liquidations: List[LiquidationEvent] = []
        self.step = 0
        self._order_ids = itertools.count(1)
        self._clock = itertools.count(1)

    @property
    def max_leverage(self) -> float:
        return 1.0 / self.initial_margin

    def account(self, owner: str, agent_class: str = "") -> PerpAccount:
        if owner not in self.accounts:
            self.accounts[owner] = PerpAccount(owner, agent_class=agent_class)
        return self.accounts[owner]

    def position(self, owner: str) -> float:
        account = self.accounts.get(owner)
        return account.position if account else 0.0

    def new_order(
        self,
        owner: str,
        side: Side,
        qty: float,
        price: Optional[float] = None,
        leverage: float = 1.0,
        agent_class: str = "",
        liquidation: bool = False,
    ) -> Order:
        """Build an order stamped with this exchange's id sequence and logical clock."""
        return Order(
            order_id=next(self._order_ids),
            owner=owner,
            side=side,
            kind=OrderKind.MARKET if price is None else OrderKind.LIMIT,
            qty=qty,
            price=price,
            leverage=leverage,
            timestamp=next(self._clock),
            agent_class=agent_class,
            liquidation=liquidation,
        )

    def check_leverage(self, order: Order) -> None:
        if order.leverage > self.max_leverage * (1 + MARGIN_RTOL):
            raise MarginCheckError(order.owner, 1.0 / order.leverage, self.initial_margin)

    def book_trade(self, account: PerpAccount, side: Side, qty: float, price: float, leverage: float) -> float:
        """
        Apply one execution to an account.

        The collateral backing any closed part is withdrawn first; then
        ``notional / leverage`` is deposited for the part that opens or
        increases the position, and that part enters the day's leverage
        average.

        Returns:
            The opening notional (0 for a pure reduction)
        """
        base_delta = side.sign * qty
        if account.position == 0 or (account.position > 0) == (base_delta > 0):
            opening = qty
        else:
            opening = max(qty - abs(account.position), 0.0)
        previous = account.position
        account.apply_trade(base_delta, -base_delta * price)
        account.release_margin(previous)
        if opening > 0:
            notional = opening * price
            account.collateral += notional / leverage
            self.accumulator.record_open(side.position_side, notional, leverage)
        return opening * price

    def eligible(self, mark: float) -> List[PerpAccount]:
        """Accounts below maintenance margin at ``mark``, in owner order."""
        return [
            self.accounts[owner]
            for owner in sorted(self.accounts)
            if self.accounts[owner].position != 0
            and self.accounts[owner].margin_ratio(mark) < self.maintenance_margin
        ]

    def advance(self, step: int) -> None:
        self.step = step

    @property
    @abstractmethod
    def mark_price(self) -> float:
        """Price used to value positions."""

    @property
    @abstractmethod
    def oi_long(self) -> float:
        """Long open interest in USD."""

    @property
    @abstractmethod
    def oi_short(self) -> float:
        """Short open interest in USD."""

    @abstractmethod
    def submit(self, order: Order) -> List[Fill]:
        """Execute (and possibly rest) an order."""

    @abstractmethod
    def close(self, owner: str) -> List[Fill]:
        """Close the owner's whole position."""

    @abstractmethod
    def risk_sweep(self, mark: Optional[float] = None) -> List[LiquidationEvent]:
        """Liquidate accounts below maintenance margin."""

    def rollup(self, date) -> ActivityRecord:
        """Close the simulated day into an ActivityRecord."""
        return self.accumulator.roll(date, self.oi_long, self.oi_short)

    def _record_liquidations(self, events: List[LiquidationEvent]) -> List[LiquidationEvent]:
        for event in events:
            self.accumulator.record_liquidation(event.side, event.notional)
            logger.info("%s: liquidated %s (%s) at %.6g", self.kind, event.owner, event.side, event.price)
        self.liquidations.extend(events)
        return events


def notional_sum(fills: List[Fill]) -> float:
    return math.fsum(f.notional for f in fills)
