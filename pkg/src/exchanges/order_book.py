"""Price-time priority order book.

Each side is a ``SortedDict`` from price to a FIFO ``deque`` of resting
orders. Bids are read from the top of their ladder, asks from the bottom.
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, Iterator, List, Optional, Tuple

from sortedcontainers import SortedDict

from .orders import Order, Side

# Quantities at or below this fraction of their order size count as filled.
DUST = 1e-12


@dataclass
class RestingOrder:
    order: Order
    remaining: float


@dataclass(frozen=True)
class Match:
    """One execution against a resting order, at the resting order's price."""

    maker: Order
    price: float
    qty: float


class OrderBook:
    """Bid and ask ladders with FIFO queues per price level."""

    def __init__(self):
        self._sides: Dict[Side, SortedDict] = {Side.BUY: SortedDict(), Side.SELL: SortedDict()}
        self._index: Dict[int, Tuple[Side, float]] = {}

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, order_id: int) -> bool:
        return order_id in self._index

    def best_bid(self) -> Optional[float]:
        bids = self._sides[Side.BUY]
        return bids.peekitem(-1)[0] if bids else None

    def best_ask(self) -> Optional[float]:
        asks = self._sides[Side.SELL]
        return asks.peekitem(0)[0] if asks else None

    def mid(self) -> Optional[float]:
        bid, ask = self.best_bid(), self.best_ask()
        if bid is None or ask is None:
            return None
        return (bid + ask) / 2.0

    def is_crossed(self) -> bool:
        bid, ask = self.best_bid(), self.best_ask()
        return bid is not None and ask is not None and bid >= ask

    def has_liquidity(self, side: Side) -> bool:
        """Whether resting orders exist on ``side``."""
        return bool(self._sides[side])

    def add(self, order: Order, remaining: float) -> None:
        """Rest ``remaining`` of a limit order at the back of its price level."""
        ladder = self._sides[order.side]
        level: Deque[RestingOrder] = ladder.setdefault(order.price, deque())
        level.append(RestingOrder(order, remaining))
        self._index[order.order_id] = (order.side, order.price)

    def _best_level(self, side: Side) -> Tuple[float, Deque[RestingOrder]]:
        ladder = self._sides[side]
        return ladder.peekitem(-1 if side is Side.BUY else 0)

    def match(self, side: Side, qty: float, limit: Optional[float] = None) -> Tuple[List[Match], float]:
        """
        Take up to ``qty`` from the side opposite to ``side``.

        Args:
            side: Side of the incoming order
            qty: Quantity to fill
            limit: Worst acceptable price, or None for a market order

        Returns:
            Matches in execution order and the unfilled quantity (0 when only
            dust is left); resting orders they exhaust are removed
        """
        book_side = side.opposite
        matches: List[Match] = []
        left = qty
        floor = DUST * qty
        while left > floor and self._sides[book_side]:
            price, level = self._best_level(book_side)
            if limit is not None and (price > limit if side is Side.BUY else price < limit):
                break
            while left > floor and level:
                resting = level[0]
                take = min(left, resting.remaining)
                matches.append(Match(resting.order, price, take))
                left -= take
                resting.remaining -= take
                if resting.remaining <= DUST * resting.order.qty:
                    level.popleft()
                    del self._index[resting.order.order_id]
            if not level:
                del self._sides[book_side][price]
        return matches, (left if left > floor else 0.0)

    def cancel(self, order_id: int) -> bool:
        """Remove a resting order; False when it is not on the book."""
        located = self._index.pop(order_id, None)
        if located is None:
            return False
        side, price = located
        level = self._sides[side][price]
        for resting in level:
            if resting.order.order_id == order_id:
                level.remove(resting)
                break
        if not level:
            del self._sides[side][price]
        return True

    def cancel_owner(self, owner: str) -> int:
        """Remove every resting order of ``owner``; returns how many were removed."""
        ids = [resting.order.order_id for resting in self.resting() if resting.order.owner == owner]
        for order_id in ids:
            self.cancel(order_id)
        return len(ids)

    def resting(self) -> Iterator[RestingOrder]:
        for ladder in self._sides.values():
            for level in ladder.values():
                yield from level

    def depth(self, side: Side) -> List[Tuple[float, float]]:
        """(price, total quantity) per level, best first."""
        ladder = self._sides[side]
        prices = reversed(ladder.keys()) if side is Side.BUY else iter(ladder.keys())
        return [(price, sum(r.remaining for r in ladder[price])) for price in prices]
