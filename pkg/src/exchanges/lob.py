"""Limit-order-book engine (centralized and hybrid venues).

Every contract pairs a buyer with a seller, so open interest is one ledger
of open contracts; the long and short figures are both that ledger valued at
the last trade price and are equal by construction.
"""

import logging
import math
from typing import List, Optional

from ..marketdata.accumulator import DailyAccumulator
from ..marketdata.records import SourceTag
from .base import Exchange
from .errors import OrderRejectedError
from .order_book import OrderBook
from .orders import Fill, LiquidationEvent, Order, Side

logger = logging.getLogger(__name__)

KEEPER = "keeper"


class LobExchange(Exchange):
    """Price-time priority matching with trades at the resting order's price."""

    kind = "cex"

    def __init__(self, initial_price: float, accumulator: Optional[DailyAccumulator] = None, **margins):
        super().__init__(accumulator or DailyAccumulator(SourceTag.LOB_CEX), **margins)
        if not initial_price > 0:
            raise ValueError(f"initial price must be > 0, got {initial_price!r}")
        self.book = OrderBook()
        self.last_price = float(initial_price)

    @property
    def mark_price(self) -> float:
        mid = self.book.mid()
        return self.last_price if mid is None else mid

    @property
    def open_contracts(self) -> float:
        """Base units held long (equal to those held short)."""
        return math.fsum(a.position for a in self.accounts.values() if a.position > 0)

    @property
    def oi_long(self) -> float:
        return self.open_contracts * self.last_price

    @property
    def oi_short(self) -> float:
        return self.oi_long

    def submit(self, order: Order) -> List[Fill]:
        """
        Match an order against the book; rest any limit remainder.

        Args:
            order: Market or limit order

        Returns:
            Fills in execution order, seen from the taker

        Raises:
            MarginCheckError: Leverage above the cap
            OrderRejectedError: Market order with nothing to match
        """
        self.check_leverage(order)
        if order.is_market and not self.book.has_liquidity(order.side.opposite):
            raise OrderRejectedError(order.order_id, "market order against an empty book", self.step)

        taker = self.account(order.owner, order.agent_class)
        fills = []
        matches, remainder = self.book.match(order.side, order.qty, order.price)
        for match in matches:
            maker = self.account(match.maker.owner, match.maker.agent_class)
            self.book_trade(taker, order.side, match.qty, match.price, order.leverage)
            self.book_trade(maker, match.maker.side, match.qty, match.price, match.maker.leverage)
            self.last_price = match.price
            self.accumulator.record_trade(match.qty * match.price)
            fills.append(
                Fill(
                    step=self.step,
                    order_id=order.order_id,
                    side=order.side,
                    price=match.price,
                    qty=match.qty,
                    owner=order.owner,
                    counterparty=match.maker.owner,
                    agent_class=order.agent_class,
                    liquidation=order.liquidation,
                    self_match=order.owner == match.maker.owner,
                )
            )
        if remainder > 0 and not order.is_market:
            self.book.add(order, remainder)
        elif remainder > 0 and order.is_market:
            logger.debug("market order %d left %.6g unfilled", order.order_id, remainder)
        self.fills.extend(fills)
        return fills

    def cancel(self, order_id: int) -> bool:
        return self.book.cancel(order_id)

    def cancel_owner(self, owner: str) -> int:
        return self.book.cancel_owner(owner)

    def close(self, owner: str, liquidation: bool = False) -> List[Fill]:
        """Send a market order that flattens the owner's position."""
        position = self.position(owner)
        if position == 0:
            return []
        account = self.accounts[owner]
        order = self.new_order(
            owner,
            Side.SELL if position > 0 else Side.BUY,
            abs(position),
            agent_class=account.agent_class,
            liquidation=liquidation,
        )
        return self.submit(order)

    def risk_sweep(self, mark: Optional[float] = None) -> List[LiquidationEvent]:
        """
        Force-close accounts below maintenance margin with market orders into the book.

        An account whose closing side of the book is empty stays open and is
        retried at the next sweep.
        """
        mark = self.mark_price if mark is None else mark
        events = []
        for account in self.eligible(mark):
            ratio = account.margin_ratio(mark)
            side = account.side
            self.book.cancel_owner(account.owner)
            try:
                fills = self.close(account.owner, liquidation=True)
            except OrderRejectedError:
                logger.warning("cannot liquidate %s: empty book", account.owner)
                continue
            if fills:
                notional = math.fsum(f.notional for f in fills)
                qty = math.fsum(f.qty for f in fills)
                events.append(LiquidationEvent(self.step, account.owner, "trader", side, notional, notional / qty, ratio))
        return self._record_liquidations(events)
