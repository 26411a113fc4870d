"""Unit tests for the oracle-priced engine."""

import datetime as dt

import numpy as np
import pytest

from src.errors import MarginCheckError
from src.exchanges.errors import OracleFeedError, OrderRejectedError, PoolCapacityError
from src.exchanges.oracle import OracleExchange, oracle_feed
from src.exchanges.orders import Side


class TestOracleFeed:
    """Test cases for oracle_feed."""

    def test_median_ignores_outlier(self):
        """Test that the median of 99, 100 and 200 is 100."""
        assert oracle_feed([[99.0], [100.0], [200.0]]).tolist() == [100.0]

    def test_mean_aggregate(self):
        """Test the mean aggregate."""
        assert oracle_feed([[99.0], [101.0]], aggregate="mean").tolist() == [100.0]

    def test_single_source_passes_through(self):
        """Test that a single source is returned unchanged."""
        prices = [30_000.0, 30_100.5, 29_950.25]
        assert oracle_feed([prices]).tolist() == prices

    def test_gaps_use_remaining_sources(self):
        """Test that a missing value is skipped."""
        feed = oracle_feed([[100.0, None], [102.0, 104.0], [101.0, float("nan")]])
        assert feed.tolist() == [101.0, 104.0]

    def test_all_sources_missing(self):
        """Test that a step without any price is an error."""
        with pytest.raises(OracleFeedError) as info:
            oracle_feed([[100.0, None], [100.0, None]])
        assert info.value.step == 1

    def test_unknown_aggregate(self):
        """Test that an unknown aggregate name is rejected."""
        with pytest.raises(ValueError):
            oracle_feed([[1.0]], aggregate="mode")


class TestOracleSubmit:
    """Test cases for OracleExchange.submit."""

    def test_fills_at_oracle_price(self):
        """Test a market buy of 2 filled in full at 30,000."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6)
        fills = exchange.submit(exchange.new_order("t", Side.BUY, 2.0))
        assert [(f.price, f.qty) for f in fills] == [(30_000.0, 2.0)]
        assert exchange.oi_long == 60_000.0 and exchange.oi_short == 0.0

    def test_close_realizes_pnl_against_pool(self):
        """Test that closing 2 long at 33,000 realizes +6,000 paid by the pool."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6)
        exchange.submit(exchange.new_order("t", Side.BUY, 2.0))
        exchange.set_price(33_000.0)
        exchange.close("t")
        assert exchange.accounts["t"].realized_pnl == pytest.approx(6_000.0)
        assert exchange.pool_balance == pytest.approx(1e6 - 6_000.0)

    def test_orders_never_move_price(self):
        """Test that 1,000 orders leave the oracle series unchanged."""
        rng = np.random.default_rng(5)
        feed = 30_000.0 * np.exp(np.cumsum(rng.normal(0.0, 0.001, size=1_000)))
        exchange = OracleExchange(float(feed[0]), pool_capital=1e12)
        observed = []
        for step, price in enumerate(feed):
            exchange.advance(step)
            exchange.set_price(float(price))
            side = Side.BUY if rng.random() < 0.5 else Side.SELL
            exchange.submit(exchange.new_order(f"t{step % 10}", side, float(rng.uniform(0.01, 2.0))))
            observed.append(exchange.mark_price)
        assert np.array_equal(np.array(observed), feed)

    def test_limit_not_marketable(self):
        """Test that a buy limit below the oracle price is rejected."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6)
        with pytest.raises(OrderRejectedError):
            exchange.submit(exchange.new_order("t", Side.BUY, 1.0, price=29_000.0))
        assert exchange.submit(exchange.new_order("t", Side.BUY, 1.0, price=31_000.0))[0].price == 30_000.0

    def test_pool_capacity(self):
        """Test that open interest beyond the pool balance is refused."""
        exchange = OracleExchange(30_000.0, pool_capital=50_000.0)
        exchange.submit(exchange.new_order("a", Side.BUY, 1.0))
        with pytest.raises(PoolCapacityError):
            exchange.submit(exchange.new_order("b", Side.BUY, 1.0))
        exchange.submit(exchange.new_order("b", Side.SELL, 1.0))
        exchange.close("a")
        assert exchange.oi_long == 0.0 and exchange.oi_short == 30_000.0

    def test_leverage_cap(self):
        """Test that leverage above 1 / initial margin is refused."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6)
        with pytest.raises(MarginCheckError):
            exchange.submit(exchange.new_order("t", Side.BUY, 1.0, leverage=11.0))


class TestOracleRiskSweep:
    """Test cases for OracleExchange.risk_sweep."""

    def test_twenty_x_long_liquidated_at_oracle_price(self):
        """Test a 20x long from 30,000 liquidated at exactly 28,700."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6, initial_margin=0.05, maintenance_margin=0.05)
        exchange.submit(exchange.new_order("t", Side.BUY, 1.0, leverage=20.0))
        exchange.set_price(28_700.0)
        events = exchange.risk_sweep()
        assert len(events) == 1
        event = events[0]
        assert (event.owner, event.side, event.price) == ("t", "long", 28_700.0)
        assert event.margin_ratio == pytest.approx(200.0 / 28_700.0)
        assert exchange.position("t") == 0.0
        assert exchange.fills[-1].liquidation

    def test_no_liquidation_above_maintenance(self):
        """Test that a small move leaves a 20x long open."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6, initial_margin=0.05, maintenance_margin=0.025)
        exchange.submit(exchange.new_order("t", Side.BUY, 1.0, leverage=20.0))
        exchange.set_price(29_900.0)
        assert exchange.risk_sweep() == []


class TestOracleRollup:
    """Test cases for the oracle engine's daily records."""

    def test_independent_ledgers_and_volume(self):
        """Test that long and short OI differ and volume sums both trades."""
        exchange = OracleExchange(30_000.0, pool_capital=1e6)
        exchange.submit(exchange.new_order("a", Side.BUY, 1.0, leverage=2.0))
        exchange.submit(exchange.new_order("b", Side.SELL, 0.5, leverage=5.0))
        record = exchange.rollup(dt.date(2024, 1, 1))
        assert (record.oi_long, record.oi_short) == (30_000.0, 15_000.0)
        assert record.volume == pytest.approx(45_000.0)
        assert (record.lev_long, record.lev_short) == (2.0, 5.0)
