"""Unit tests for the order book and the LOB engine."""

import datetime as dt
import math

import numpy as np
import pytest

from src.exchanges.errors import InvalidOrderError, OrderRejectedError
from src.exchanges.lob import LobExchange
from src.exchanges.order_book import OrderBook
from src.exchanges.orders import Order, OrderKind, Side


def limit(exchange, owner, side, qty, price, leverage=1.0):
    return exchange.submit(exchange.new_order(owner, side, qty, price, leverage))


def market(exchange, owner, side, qty, leverage=1.0):
    return exchange.submit(exchange.new_order(owner, side, qty, leverage=leverage))


class TestOrder:
    """Test cases for Order validation."""

    def test_positive_quantity(self):
        """Test that a zero quantity is rejected."""
        with pytest.raises(InvalidOrderError):
            Order(1, "a", Side.BUY, OrderKind.MARKET, 0.0)

    def test_limit_needs_price(self):
        """Test that a limit order without a price is rejected."""
        with pytest.raises(InvalidOrderError):
            Order(1, "a", Side.SELL, OrderKind.LIMIT, 1.0)


class TestOrderBook:
    """Test cases for OrderBook."""

    def test_best_prices_and_mid(self):
        """Test best bid/ask and the mid price."""
        book = OrderBook()
        book.add(Order(1, "a", Side.BUY, OrderKind.LIMIT, 1.0, 99.0), 1.0)
        book.add(Order(2, "a", Side.BUY, OrderKind.LIMIT, 1.0, 98.0), 1.0)
        book.add(Order(3, "b", Side.SELL, OrderKind.LIMIT, 1.0, 101.0), 1.0)
        assert (book.best_bid(), book.best_ask(), book.mid()) == (99.0, 101.0, 100.0)
        assert book.depth(Side.BUY) == [(99.0, 1.0), (98.0, 1.0)]

    def test_cancel(self):
        """Test that cancelled orders leave the book and empty levels disappear."""
        book = OrderBook()
        book.add(Order(1, "a", Side.SELL, OrderKind.LIMIT, 1.0, 101.0), 1.0)
        book.add(Order(2, "b", Side.SELL, OrderKind.LIMIT, 1.0, 101.0), 1.0)
        assert book.cancel(1)
        assert not book.cancel(1)
        assert book.depth(Side.SELL) == [(101.0, 1.0)]
        assert book.cancel_owner("b") == 1
        assert book.best_ask() is None and len(book) == 0

    def test_dust_maker_is_removed(self):
        """Test that a maker left with rounding dust leaves the book."""
        book = OrderBook()
        book.add(Order(1, "a", Side.BUY, OrderKind.LIMIT, 0.1, 100.0), 0.1)
        book.add(Order(2, "b", Side.BUY, OrderKind.LIMIT, 0.2, 99.0), 0.2)
        matches, remainder = book.match(Side.SELL, 0.3, 99.0)
        assert [m.maker.owner for m in matches] == ["a", "b"]
        assert remainder == 0.0
        assert len(book) == 0
        assert not book.has_liquidity(Side.BUY)

    def test_dust_taker_remainder_is_filled(self):
        """Test that a taker left with rounding dust reports nothing unfilled."""
        book = OrderBook()
        book.add(Order(1, "a", Side.SELL, OrderKind.LIMIT, 0.7, 100.0), 0.7)
        book.add(Order(2, "b", Side.SELL, OrderKind.LIMIT, 0.3, 101.0), 0.3)
        matches, remainder = book.match(Side.BUY, 1.0, 101.0)
        assert len(matches) == 2
        assert remainder == 0.0

    def test_genuine_remainder_is_reported(self):
        """Test that a limit order larger than the crossing depth keeps its remainder."""
        book = OrderBook()
        book.add(Order(1, "a", Side.SELL, OrderKind.LIMIT, 1.0, 100.0), 1.0)
        book.add(Order(2, "a", Side.SELL, OrderKind.LIMIT, 1.0, 105.0), 1.0)
        matches, remainder = book.match(Side.BUY, 1.5, 101.0)
        assert [(m.price, m.qty) for m in matches] == [(100.0, 1.0)]
        assert remainder == pytest.approx(0.5)


class TestLobSubmit:
    """Test cases for LobExchange.submit."""

    def test_single_level_match(self):
        """Test a market buy of 0.4 against one resting ask."""
        exchange = LobExchange(10_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 10_000.0)
        fills = market(exchange, "t", Side.BUY, 0.4)
        assert [(f.price, f.qty) for f in fills] == [(10_000.0, 0.4)]
        assert exchange.book.depth(Side.SELL) == [(10_000.0, pytest.approx(0.6))]

    def test_market_order_walks_book(self):
        """Test a market buy of 1.5 across two ask levels."""
        exchange = LobExchange(10_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 10_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 10_010.0)
        fills = market(exchange, "t", Side.BUY, 1.5)
        assert [(f.price, f.qty) for f in fills] == [(10_000.0, 1.0), (10_010.0, 0.5)]

    def test_fifo_within_level(self):
        """Test that the earlier of two same-price bids fills first."""
        exchange = LobExchange(10_000.0)
        limit(exchange, "first", Side.BUY, 1.0, 9_990.0)
        limit(exchange, "second", Side.BUY, 1.0, 9_990.0)
        fills = limit(exchange, "seller", Side.SELL, 1.0, 9_980.0)
        assert [(f.counterparty, f.price) for f in fills] == [("first", 9_990.0)]
        assert exchange.position("first") == 1.0 and exchange.position("second") == 0.0

    def test_limit_remainder_rests(self):
        """Test that the unfilled part of a crossing limit order rests."""
        exchange = LobExchange(10_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 10_000.0)
        limit(exchange, "t", Side.BUY, 3.0, 10_005.0)
        assert exchange.book.best_bid() == 10_005.0
        assert exchange.book.depth(Side.BUY) == [(10_005.0, pytest.approx(2.0))]
        assert exchange.book.best_ask() is None

    def test_filled_limit_order_never_rests_dust(self):
        """Test that a fully filled limit order leaves no bid under a better ask."""
        exchange = LobExchange(100.0)
        limit(exchange, "mm", Side.BUY, 0.1, 100.0)
        limit(exchange, "mm", Side.BUY, 0.2, 99.0)
        limit(exchange, "mm", Side.SELL, 1.0, 104.0)
        limit(exchange, "t", Side.SELL, 0.3, 99.0)
        assert exchange.book.best_bid() is None
        assert exchange.book.depth(Side.SELL) == [(104.0, 1.0)]
        assert not exchange.book.is_crossed()

    def test_market_order_against_empty_book(self):
        """Test that a market order with nothing to match is rejected."""
        with pytest.raises(OrderRejectedError):
            market(LobExchange(10_000.0), "t", Side.BUY, 1.0)

    def test_self_match_is_flagged(self):
        """Test that trading against one's own order is allowed and flagged."""
        exchange = LobExchange(10_000.0)
        limit(exchange, "a", Side.SELL, 1.0, 10_000.0)
        fills = market(exchange, "a", Side.BUY, 1.0)
        assert fills[0].self_match
        assert exchange.position("a") == 0.0

    def test_cash_and_base_conservation(self):
        """Test that each fill moves base and cash between the two accounts only."""
        exchange = LobExchange(10_000.0)
        limit(exchange, "mm", Side.SELL, 2.0, 10_000.0)
        market(exchange, "t", Side.BUY, 2.0)
        t, mm = exchange.accounts["t"], exchange.accounts["mm"]
        assert t.position + mm.position == 0.0
        assert t.open_notional + mm.open_notional == 0.0

    def test_random_stream_keeps_identity_and_integrity(self):
        """Test OI identity, uncrossed book and matched contracts over 10,000 events."""
        rng = np.random.default_rng(17)
        exchange = LobExchange(10_000.0)
        owners = [f"t{i}" for i in range(30)]
        for _ in range(10_000):
            owner = owners[rng.integers(0, 30)]
            side = Side.BUY if rng.random() < 0.5 else Side.SELL
            qty = float(rng.uniform(0.01, 1.0))
            leverage = float(rng.uniform(1.0, 5.0))
            if rng.random() < 0.7:
                offset = float(rng.normal(0.0, 20.0))
                price = round(exchange.mark_price + (-offset if side is Side.BUY else offset), 0)
                limit(exchange, owner, side, qty, max(price, 1.0), leverage)
            else:
                try:
                    market(exchange, owner, side, qty, leverage)
                except OrderRejectedError:
                    pass
            assert exchange.oi_long == exchange.oi_short
            assert not exchange.book.is_crossed()
        longs = math.fsum(a.position for a in exchange.accounts.values() if a.position > 0)
        shorts = math.fsum(-a.position for a in exchange.accounts.values() if a.position < 0)
        assert longs == pytest.approx(shorts, rel=1e-9)

    def test_fifo_property_randomized(self):
        """Test that any same-price pair fills in submission order."""
        rng = np.random.default_rng(23)
        for _ in range(200):
            exchange = LobExchange(100.0)
            side = Side.BUY if rng.random() < 0.5 else Side.SELL
            price = float(rng.integers(90, 110))
            sizes = rng.uniform(0.1, 2.0, size=2)
            limit(exchange, "early", side, float(sizes[0]), price)
            limit(exchange, "late", side, float(sizes[1]), price)
            fills = market(exchange, "taker", side.opposite, float(rng.uniform(0.05, 3.0)))
            assert fills[0].counterparty == "early"
            if exchange.position("late") != 0.0:
                assert abs(exchange.position("early")) == pytest.approx(float(sizes[0]))


class TestLobRiskSweep:
    """Test cases for LobExchange.risk_sweep."""

    def test_healthy_accounts(self):
        """Test that an unlevered book has nothing to liquidate."""
        exchange = LobExchange(30_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 30_000.0)
        market(exchange, "t", Side.BUY, 1.0)
        assert exchange.risk_sweep(29_000.0) == []

    def test_twenty_x_long_liquidated_by_market_sell(self):
        """Test a 20x long from 30,000 liquidated at mark 28,700 through a market sell."""
        exchange = LobExchange(30_000.0, initial_margin=0.05, maintenance_margin=0.05)
        limit(exchange, "mm", Side.SELL, 1.0, 30_000.0)
        market(exchange, "t", Side.BUY, 1.0, leverage=20.0)
        limit(exchange, "bidder", Side.BUY, 5.0, 28_700.0)
        assert exchange.accounts["t"].margin_ratio(28_700.0) == pytest.approx(200.0 / 28_700.0)
        events = exchange.risk_sweep(28_700.0)
        assert [(e.owner, e.side) for e in events] == [("t", "long")]
        last = exchange.fills[-1]
        assert last.side is Side.SELL and last.liquidation and last.price == 28_700.0
        assert exchange.position("t") == 0.0
        assert exchange.oi_long == exchange.oi_short
        assert exchange.accumulator.liquidations["long"] == pytest.approx(28_700.0)

    def test_round_trip_releases_margin(self):
        """Test that a closed and reopened 20x long is liquidated on its own margin."""
        exchange = LobExchange(30_000.0, initial_margin=0.05, maintenance_margin=0.05)
        limit(exchange, "mm", Side.SELL, 2.0, 30_000.0)
        market(exchange, "t", Side.BUY, 1.0, leverage=20.0)
        limit(exchange, "bidder", Side.BUY, 1.0, 30_000.0)
        market(exchange, "t", Side.SELL, 1.0)
        assert exchange.accounts["t"].collateral == 0.0
        market(exchange, "t", Side.BUY, 1.0, leverage=20.0)
        assert exchange.accounts["t"].collateral == pytest.approx(1_500.0)
        assert exchange.accounts["t"].margin_ratio(28_700.0) == pytest.approx(200.0 / 28_700.0)


class TestLobRollup:
    """Test cases for the daily rollup of the LOB engine."""

    def test_quiet_day_carries_open_interest(self):
        """Test that a day without trades keeps OI and has zero volume."""
        exchange = LobExchange(30_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 30_000.0)
        market(exchange, "t", Side.BUY, 1.0, leverage=4.0)
        first = exchange.rollup(dt.date(2024, 1, 1))
        second = exchange.rollup(dt.date(2024, 1, 2))
        assert second.volume == 0.0
        assert (second.oi_long, second.oi_short) == (first.oi_long, first.oi_short) == (30_000.0, 30_000.0)
        assert (second.lev_long, second.lev_short) == (first.lev_long, first.lev_short) == (4.0, 1.0)

    def test_volume_is_fill_notional(self):
        """Test that one fill of 0.5 at 30,000 is 15,000 USD of volume."""
        exchange = LobExchange(30_000.0)
        limit(exchange, "mm", Side.SELL, 1.0, 30_000.0)
        market(exchange, "t", Side.BUY, 0.5)
        assert exchange.rollup(dt.date(2024, 1, 1)).volume == pytest.approx(15_000.0)

    def test_volume_matches_fill_log(self):
        """Test a seeded 100-trade day against the fill log."""
        rng = np.random.default_rng(100)
        exchange = LobExchange(30_000.0)
        trades = 0
        while trades < 100:
            limit(exchange, "mm", Side.SELL, 1.0, float(30_000 + rng.integers(0, 50)))
            limit(exchange, "mm", Side.BUY, 1.0, float(29_950 - rng.integers(0, 50)))
            side = Side.BUY if rng.random() < 0.5 else Side.SELL
            trades += len(market(exchange, f"t{rng.integers(0, 5)}", side, float(rng.uniform(0.1, 1.0))))
        record = exchange.rollup(dt.date(2024, 1, 1))
        assert record.volume == pytest.approx(math.fsum(f.notional for f in exchange.fills), rel=1e-12)
