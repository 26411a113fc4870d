"""Oracle-priced engine: traders take an externally aggregated price.

A liquidity pool is the counterparty to every trade. Fills happen at the
oracle price for the full quantity and never feed back into it, so long and
short open interest move independently.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..marketdata.accumulator import DailyAccumulator
from ..marketdata.records import SourceTag
from .base import Exchange
from .errors import OracleFeedError, OrderRejectedError, PoolCapacityError
from .orders import Fill, LiquidationEvent, Order, Side

logger = logging.getLogger(__name__)

AGGREGATORS: Dict[str, Callable[[np.ndarray], float]] = {
    "median": np.median,
    "mean": np.mean,
}


def oracle_feed(sources: Sequence[Sequence[Optional[float]]], aggregate: str = "median") -> np.ndarray:
    """
    Aggregate per-step prices from several sources.

    Args:
        sources: One price series per source, equal lengths; None or NaN marks a gap
        aggregate: ``median`` (default) or ``mean`` over the sources present

    Returns:
        One oracle price per step

    Raises:
        OracleFeedError: Every source is missing at some step
    """
    if not sources:
        raise ValueError("oracle_feed needs at least one source")
    if aggregate not in AGGREGATORS:
        raise ValueError(f"Unknown aggregate {aggregate!r} (expected one of: {', '.join(AGGREGATORS)})")
    matrix = np.array([[np.nan if p is None else p for p in series] for series in sources], dtype=float)
    if matrix.ndim != 2:
        raise ValueError("oracle sources must have equal lengths")
    combine = AGGREGATORS[aggregate]
    prices = np.empty(matrix.shape[1])
    for step in range(matrix.shape[1]):
        column = matrix[:, step]
        present = column[~np.isnan(column)]
        if present.size == 0:
            raise OracleFeedError(step)
        prices[step] = present[0] if present.size == 1 else combine(present)
    return prices


class OracleExchange(Exchange):
    """Fills every order at the current oracle price against the pool."""

    kind = "oracle"

    def __init__(
        self,
        initial_price: float,
        pool_capital: float,
        accumulator: Optional[DailyAccumulator] = None,
        **margins,
    ):
        super().__init__(accumulator or DailyAccumulator(SourceTag.ORACLE), **margins)
        if not initial_price > 0:
            raise ValueError(f"initial price must be > 0, got {initial_price!r}")
        if not pool_capital > 0:
            raise ValueError(f"pool capital must be > 0, got {pool_capital!r}")
        self.oracle_price = float(initial_price)
        self.pool_capital = float(pool_capital)
        self.pool_balance = float(pool_capital)

    def set_price(self, price: float) -> None:
        if not (math.isfinite(price) and price > 0):
            raise ValueError(f"oracle price must be > 0, got {price!r}")
        self.oracle_price = float(price)

    @property
    def mark_price(self) -> float:
        return self.oracle_price

    @property
    def oi_long(self) -> float:
        return math.fsum(a.open_notional for a in self.accounts.values() if a.position > 0)

    @property
    def oi_short(self) -> float:
        return math.fsum(-a.open_notional for a in self.accounts.values() if a.position < 0)

    def _capacity_check(self, order: Order) -> None:
        account = self.accounts.get(order.owner)
        position = account.position if account else 0.0
        increase = order.qty if position == 0 or (position > 0) == (order.side is Side.BUY) else max(
            order.qty - abs(position), 0.0
        )
        if increase == 0:
            return
        ledger = self.oi_long if order.side is Side.BUY else self.oi_short
        if ledger + increase * self.oracle_price > self.pool_balance:
            raise PoolCapacityError(
                f"{order.side.position_side} open interest would exceed pool balance {self.pool_balance:.6g}",
                self.step,
            )

    def submit(self, order: Order) -> List[Fill]:
        """
        Fill an order in full at the oracle price.

        Limit orders execute only when the oracle price is at or better than
        their limit.

        Raises:
            MarginCheckError: Leverage above the cap
            PoolCapacityError: The pool cannot back the new open interest
            OrderRejectedError: Limit not marketable at the oracle price
        """
        self.check_leverage(order)
        price = self.oracle_price
        if not order.is_market and (price > order.price if order.side is Side.BUY else price < order.price):
            raise OrderRejectedError(order.order_id, f"limit {order.price} not marketable at oracle {price}", self.step)
        self._capacity_check(order)

        account = self.account(order.owner, order.agent_class)
        realized_before = account.realized_pnl
        self.book_trade(account, order.side, order.qty, price, order.leverage)
        self.pool_balance -= account.realized_pnl - realized_before
        self.accumulator.record_trade(order.qty * price)
        fill = Fill(
            step=self.step,
            order_id=order.order_id,
            side=order.side,
            price=price,
            qty=order.qty,
            owner=order.owner,
            agent_class=order.agent_class,
            liquidation=order.liquidation,
        )
        self.fills.append(fill)
        return [fill]

    def close(self, owner: str, liquidation: bool = False) -> List[Fill]:
        position = self.position(owner)
        if position == 0:
            return []
        order = self.new_order(
            owner,
            Side.SELL if position > 0 else Side.BUY,
            abs(position),
            agent_class=self.accounts[owner].agent_class,
            liquidation=liquidation,
        )
        return self.submit(order)

    def risk_sweep(self, mark: Optional[float] = None) -> List[LiquidationEvent]:
        """Close accounts below maintenance margin at the oracle price (no price impact)."""
        mark = self.oracle_price if mark is None else mark
        events = []
        for account in self.eligible(mark):
            ratio = account.margin_ratio(mark)
            side = account.side
            fill = self.close(account.owner, liquidation=True)[0]
            events.append(LiquidationEvent(self.step, account.owner, "trader", side, fill.notional, fill.price, ratio))
        return self._record_liquidations(events)
