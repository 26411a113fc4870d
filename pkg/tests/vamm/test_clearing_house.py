"""Unit tests for the VAMM clearing house."""

import datetime as dt

import numpy as np
import pytest

from src.errors import MarginCheckError
from src.exchanges.orders import Side
from src.vamm.accounts import PerpAccount
from src.vamm.clearing_house import ClearingHouse
from src.vamm.concentrated import ConcentratedPool
from src.vamm.pool import Direction, UniformPool, price_sensitivity


def uniform_house(q_vbtc=100.0, fee_rate=0.0):
    return ClearingHouse(UniformPool.from_price(10_000.0, q_vbtc, fee_rate))


class TestPerpAccount:
    """Test cases for PerpAccount bookkeeping."""

    def test_realized_pnl_on_close(self):
        """Test PnL realized when a long is sold at a higher price."""
        account = PerpAccount("a", collateral=1_000.0)
        account.apply_trade(1.0, -10_000.0)
        assert account.apply_trade(-1.0, 10_100.0) == pytest.approx(100.0)
        assert account.position == 0.0 and account.open_notional == 0.0
        assert account.collateral == pytest.approx(1_100.0)

    def test_partial_reduce_keeps_entry_price(self):
        """Test that halving a short keeps its entry price."""
        account = PerpAccount("a", collateral=1_000.0)
        account.apply_trade(-2.0, 20_000.0)
        account.apply_trade(1.0, -9_000.0)
        assert account.position == -1.0
        assert account.entry_price == pytest.approx(10_000.0)
        assert account.realized_pnl == pytest.approx(1_000.0)

    def test_flip_through_zero(self):
        """Test that an oversized opposite trade closes and reopens."""
        account = PerpAccount("a")
        account.apply_trade(1.0, -10_000.0)
        account.apply_trade(-3.0, 33_000.0)
        assert account.position == pytest.approx(-2.0)
        assert account.open_notional == pytest.approx(-22_000.0)
        assert account.realized_pnl == pytest.approx(1_000.0)

    def test_release_on_full_close(self):
        """Test that closing withdraws all collateral, realized PnL included."""
        account = PerpAccount("a", collateral=1_000.0)
        account.apply_trade(1.0, -10_000.0)
        account.apply_trade(-1.0, 10_100.0)
        assert account.release_margin(1.0) == pytest.approx(1_100.0)
        assert account.collateral == 0.0

    def test_release_on_partial_reduce(self):
        """Test that halving a position withdraws half the collateral."""
        account = PerpAccount("a", collateral=1_000.0)
        account.apply_trade(2.0, -20_000.0)
        account.apply_trade(-1.0, 10_000.0)
        assert account.release_margin(2.0) == pytest.approx(500.0)
        assert account.collateral == pytest.approx(500.0)

    def test_release_keeps_bad_debt_and_ignores_increases(self):
        """Test that negative collateral stays and adding to a position releases nothing."""
        account = PerpAccount("a", collateral=-50.0)
        assert account.release_margin(1.0) == 0.0
        assert account.collateral == -50.0
        account = PerpAccount("b", collateral=100.0)
        account.apply_trade(1.0, -10_000.0)
        account.apply_trade(1.0, -10_000.0)
        assert account.release_margin(1.0) == 0.0
        assert account.collateral == 100.0


class TestOpenPosition:
    """Test cases for ClearingHouse.open_position and close_position."""

    def test_long_raises_price_short_lowers_it(self):
        """Test the price impact of opening each side."""
        house = uniform_house()
        before = house.pool.price
        house.open_position("a", Side.BUY, 1_000.0, 5.0)
        assert house.pool.price > before
        middle = house.pool.price
        house.open_position("b", Side.SELL, 1_000.0, 5.0)
        assert house.pool.price < middle

    def test_open_then_close_has_zero_pnl(self):
        """Test that a zero-fee open-close round trip realizes no PnL."""
        for side in (Side.BUY, Side.SELL):
            house = uniform_house()
            house.open_position("a", side, 2_000.0, 10.0)
            house.close_position("a")
            account = house.accounts["a"]
            assert account.position == 0.0
            assert abs(account.realized_pnl) <= 1e-9 * 20_000.0

    def test_open_interest_and_volume(self):
        """Test that openings add their notional to OI and volume."""
        house = uniform_house()
        house.open_position("a", Side.BUY, 1_000.0, 3.0)
        house.open_position("b", Side.SELL, 500.0, 2.0)
        assert house.oi_long == pytest.approx(3_000.0)
        assert house.oi_short == pytest.approx(1_000.0)
        record = house.roll_day(dt.date(2024, 1, 1))
        assert record.volume == pytest.approx(4_000.0)
        assert record.lev_long is None and record.lev_short is None
        assert house.accumulator.volume == 0.0

    def test_leverage_cap(self):
        """Test that leverage above 1 / initial margin is refused without side effects."""
        house = uniform_house()
        with pytest.raises(MarginCheckError):
            house.open_position("a", Side.BUY, 1_000.0, 10.5)
        assert house.pool.price == 10_000.0
        assert "a" not in house.accounts or house.accounts["a"].collateral == 0.0

    def test_leverage_at_cap_passes_with_fee(self):
        """Test that exactly maximal leverage is accepted on a pool with fees."""
        house = uniform_house(fee_rate=0.003)
        house.open_position("a", Side.SELL, 1_000.0, 10.0)
        assert house.accounts["a"].position < 0

    def test_sensitivity_follows_open_interest(self):
        """Test that longs raise and shorts lower the price sensitivity at every step."""
        for side, grows in ((Side.BUY, True), (Side.SELL, False)):
            house = uniform_house(q_vbtc=1_000.0)
            previous = price_sensitivity(house.pool)
            for i in range(100):
                house.open_position(f"t{i}", side, 1_000.0, 5.0)
                current = price_sensitivity(house.pool)
                assert (current > previous) if grows else (current < previous)
                previous = current

    def test_base_units_conserved(self):
        """Test that credited base plus pool base stays constant over random activity."""
        house = uniform_house(q_vbtc=500.0)
        total = house.pool.q_vbtc + house.base_credited
        rng = np.random.default_rng(8)
        for step in range(500):
            owner = f"t{rng.integers(0, 20)}"
            if rng.random() < 0.3:
                house.close_position(owner)
            else:
                side = Side.BUY if rng.random() < 0.5 else Side.SELL
                try:
                    house.open_position(owner, side, float(rng.uniform(100.0, 2_000.0)), float(rng.uniform(1.0, 8.0)))
                except MarginCheckError:
                    pass
            if step % 50 == 0:
                house.liquidate_sweep()
        assert house.pool.q_vbtc + house.base_credited == pytest.approx(total, rel=1e-9)


class TestLiquidateSweep:
    """Test cases for ClearingHouse.liquidate_sweep."""

    def test_healthy_accounts(self):
        """Test that well-collateralized accounts are left alone."""
        house = uniform_house()
        house.open_position("a", Side.BUY, 1_000.0, 2.0)
        house.open_position("b", Side.SELL, 1_000.0, 2.0)
        assert house.liquidate_sweep() == []

    def test_ten_x_long_below_maintenance(self):
        """Test that a 10x long from 10,000 is liquidated when the mark drops to 9,200."""
        house = uniform_house(q_vbtc=1e6)
        house.open_position("a", Side.BUY, 1_000.0, 10.0)
        ratio = house.accounts["a"].margin_ratio(9_200.0)
        assert ratio == pytest.approx((1_000.0 - 800.0) / 9_200.0, rel=1e-4)
        events = house.liquidate_sweep(9_200.0)
        assert [(e.owner, e.kind, e.side) for e in events] == [("a", "trader", "long")]
        assert house.accounts["a"].position == 0.0
        assert house.accumulator.liquidations["long"] == pytest.approx(events[0].notional)
        assert house.oi_long == 0.0

    def test_round_trip_leaves_no_collateral_behind(self):
        """Test that a reopened position is backed only by its own margin."""
        house = uniform_house(q_vbtc=1e6)
        house.open_position("a", Side.BUY, 1_000.0, 10.0)
        house.close_position("a")
        assert house.accounts["a"].collateral == pytest.approx(0.0, abs=1e-6)
        house.open_position("a", Side.BUY, 1_000.0, 10.0)
        assert house.accounts["a"].collateral == pytest.approx(1_000.0, abs=1e-6)
        assert [e.owner for e in house.liquidate_sweep(9_200.0)] == ["a"]

    def test_sweep_is_monotone_for_longs(self):
        """Test that a long eligible at one mark stays eligible at lower marks."""
        for mark in (9_300.0, 9_000.0, 5_000.0):
            house = uniform_house(q_vbtc=1e6)
            house.open_position("a", Side.BUY, 1_000.0, 10.0)
            assert [e.side for e in house.liquidate_sweep(mark)] == ["long"]

    def test_lp_liquidated_on_short_during_rise(self):
        """Test that a leveraged LP liquidated while the price rises is labeled short."""
        pool = ConcentratedPool(10_000.0)
        house = ClearingHouse(pool)
        house.add_liquidity("protocol", 4_000.0, 25_000.0, liquidity=50_000.0)
        house.add_liquidity("lp", 9_000.0, 11_500.0, liquidity=5_000.0, leverage=10.0)
        added = house.accumulator.liquidity_change
        events = []
        for target in np.linspace(10_100.0, 12_500.0, 25):
            if target <= pool.spot_price():
                continue
            direction, amount = pool.quote_for_target_price(float(target))
            assert direction is Direction.QUOTE_IN
            pool.swap(direction, amount)
            events.extend(house.liquidate_sweep())
        lp_events = [e for e in events if e.kind == "lp"]
        assert [(e.owner, e.side) for e in lp_events] == [("lp", "short")]
        assert house.accumulator.liquidations["short"] > 0
        assert house.accumulator.liquidity_change < added

    def test_drained_close_keeps_earlier_events_and_retries(self):
        """Test that a close the pool cannot absorb leaves earlier liquidations recorded."""
        pool = ConcentratedPool(10_000.0)
        house = ClearingHouse(pool)
        house.add_liquidity("protocol", 9_000.0, 11_000.0, liquidity=50_000.0)
        house.open_position("a", Side.BUY, 100.0, 10.0)
        house.open_position("b", Side.BUY, 20_000.0, 10.0)
        direction, amount = pool.quote_for_target_price(9_050.0)
        pool.swap(direction, amount)
        size_b = house.accounts["b"].position

        events = house.liquidate_sweep()

        assert [(e.owner, e.side) for e in events] == [("a", "long")]
        assert house.liquidations == events
        assert house.accumulator.liquidations["long"] == pytest.approx(events[0].notional)
        assert house.accounts["a"].position == 0.0
        assert house.accounts["b"].position == size_b

        house.add_liquidity("backstop", 4_000.0, 25_000.0, liquidity=50_000.0)
        retried = house.liquidate_sweep()
        assert [(e.owner, e.side) for e in retried] == [("b", "long")]
        assert house.accounts["b"].position == 0.0
        assert [e.owner for e in house.liquidations] == ["a", "b"]
