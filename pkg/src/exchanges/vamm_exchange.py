"""Adapter presenting a VAMM clearing house through the exchange interface."""

from typing import List, Optional

from ..vamm.clearing_house import ClearingHouse
from .base import Exchange
from .errors import OrderRejectedError
from .orders import Fill, LiquidationEvent, Order, Side


class VammExchange(Exchange):
    """Market orders become clearing-house positions priced by the pool."""

    kind = "vamm"

    def __init__(self, house: ClearingHouse):
        super().__init__(house.accumulator, house.initial_margin, house.maintenance_margin)
        self.house = house
        self.accounts = house.accounts
        self.fills = house.fills
        self.liquidations = house.liquidations

    @property
    def pool(self):
        return self.house.pool

    @property
    def mark_price(self) -> float:
        return self.house.mark_price

    @property
    def oi_long(self) -> float:
        return self.house.oi_long

    @property
    def oi_short(self) -> float:
        return self.house.oi_short

    def advance(self, step: int) -> None:
        super().advance(step)
        self.house.step = step

    def submit(self, order: Order) -> List[Fill]:
        """
        Trade ``qty`` base units' worth of notional at the pool's current price.

        Limit orders execute only when marketable at the pool price.
        """
        price = self.house.mark_price
        if not order.is_market and (price > order.price if order.side is Side.BUY else price < order.price):
            raise OrderRejectedError(order.order_id, f"limit {order.price} not marketable at pool {price}", self.step)
        notional = order.qty * price
        fill = self.house.open_position(order.owner, order.side, notional / order.leverage, order.leverage, order.agent_class)
        return [fill]

    def close(self, owner: str) -> List[Fill]:
        fill = self.house.close_position(owner)
        return [] if fill is None else [fill]

    def risk_sweep(self, mark: Optional[float] = None) -> List[LiquidationEvent]:
        return self.house.liquidate_sweep(mark)

    def rollup(self, date):
        return self.house.roll_day(date)
