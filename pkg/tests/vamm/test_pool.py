"""Unit tests for the uniform constant-product pool."""

import numpy as np
import pytest

from src.vamm.errors import EmptyReserveError, NegativeAmountError, PoolDrainError
from src.vamm.pool import Direction, UniformPool, pool_price, price_sensitivity


def pool_with_base(k, q_vbtc):
    return UniformPool(k / q_vbtc, q_vbtc)


class TestPoolPrice:
    """Test cases for pool_price."""

    def test_ratio(self):
        """Test that the price is the reserve ratio."""
        assert pool_price(UniformPool(1_000_000.0, 100.0)) == 10_000.0

    def test_scale_invariance(self):
        """Test that scaling both reserves keeps the price."""
        assert pool_price(UniformPool(7_000_000.0, 700.0)) == pytest.approx(10_000.0, rel=1e-15)

    def test_price_after_swap(self):
        """Test the price after paying 10,000 vUSDC into a 1e6/100 pool."""
        pool = UniformPool(1_000_000.0, 100.0)
        pool.swap(Direction.QUOTE_IN, 10_000.0)
        assert pool_price(pool) == pytest.approx(1_010_000.0 / (1e8 / 1_010_000.0), rel=1e-12)
        assert pool_price(pool) == pytest.approx(10_201.0, rel=1e-12)

    def test_empty_base_reserve(self):
        """Test that a pool without base reserve is rejected."""
        with pytest.raises(EmptyReserveError):
            UniformPool(1_000.0, 0.0)


class TestPriceSensitivity:
    """Test cases for price_sensitivity."""

    def test_known_value(self):
        """Test 2k/Q^3 at k = 1e8, Q = 100."""
        assert price_sensitivity(UniformPool(1_000_000.0, 100.0)) == pytest.approx(200.0, rel=1e-15)

    def test_matches_finite_difference_at_reference_point(self):
        """Test the analytic slope against a central difference with h = 1e-4."""
        k, q, h = 1e8, 100.0, 1e-4
        numeric = (pool_price(pool_with_base(k, q - h)) - pool_price(pool_with_base(k, q + h))) / (2 * h)
        assert price_sensitivity(pool_with_base(k, q)) == pytest.approx(numeric, rel=1e-6)

    def test_matches_finite_difference_on_grid(self):
        """Test the analytic slope on 100 reserve levels."""
        k = 1e8
        for q in np.linspace(50.0, 500.0, 100):
            h = q * 1e-5
            numeric = (pool_price(pool_with_base(k, q - h)) - pool_price(pool_with_base(k, q + h))) / (2 * h)
            assert price_sensitivity(pool_with_base(k, q)) == pytest.approx(numeric, rel=1e-6)

    def test_cubic_law(self):
        """Test that doubling the base reserve divides the sensitivity by 8."""
        before = price_sensitivity(pool_with_base(1e8, 100.0))
        after = price_sensitivity(pool_with_base(1e8, 200.0))
        assert before / after == pytest.approx(8.0, rel=1e-12)

    def test_strictly_decreasing(self):
        """Test monotone decrease over a reserve grid."""
        values = [price_sensitivity(pool_with_base(1e8, q)) for q in np.linspace(50.0, 500.0, 50)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestSwap:
    """Test cases for UniformPool swaps."""

    def test_zero_amount(self):
        """Test that a zero swap returns zero and leaves the pool unchanged."""
        pool = UniformPool(1_000_000.0, 100.0)
        result = pool.swap(Direction.QUOTE_IN, 0.0)
        assert result.amount_out == 0.0
        assert (pool.q_vusdc, pool.q_vbtc) == (1_000_000.0, 100.0)

    def test_closed_form_output(self):
        """Test the output of 10,000 vUSDC against the closed form."""
        pool = UniformPool(1_000_000.0, 100.0)
        result = pool.swap(Direction.QUOTE_IN, 10_000.0)
        assert result.amount_out == pytest.approx(100.0 - 1e8 / 1_010_000.0, rel=1e-12)
        assert result.amount_out == pytest.approx(0.990099, rel=1e-6)

    def test_round_trip(self):
        """Test that swapping the proceeds back restores the reserves."""
        pool = UniformPool(1_000_000.0, 100.0)
        out = pool.swap(Direction.QUOTE_IN, 25_000.0).amount_out
        back = pool.swap(Direction.BASE_IN, out).amount_out
        assert back == pytest.approx(25_000.0, rel=1e-9)
        assert pool.q_vusdc == pytest.approx(1_000_000.0, rel=1e-9)
        assert pool.q_vbtc == pytest.approx(100.0, rel=1e-9)

    def test_negative_amount(self):
        """Test that a negative input is rejected."""
        with pytest.raises(NegativeAmountError):
            UniformPool(1_000_000.0, 100.0).swap(Direction.BASE_IN, -1.0)

    def test_fee_taken_before_curve(self):
        """Test that a fee of f prices like a fee-free swap of (1 - f) * amount."""
        with_fee = UniformPool(1_000_000.0, 100.0, fee_rate=0.003)
        without = UniformPool(1_000_000.0, 100.0)
        result = with_fee.swap(Direction.QUOTE_IN, 10_000.0)
        assert result.fee == pytest.approx(30.0)
        assert result.amount_out == pytest.approx(without.simulate_swap(Direction.QUOTE_IN, 9_970.0), rel=1e-12)
        assert with_fee.k == without.k

    def test_no_free_lunch(self):
        """Test that round trips never return more than was paid in."""
        rng = np.random.default_rng(5)
        for fee in (0.0, 0.001, 0.01):
            pool = UniformPool(1_000_000.0, 100.0, fee_rate=fee)
            for _ in range(200):
                amount = float(rng.uniform(1.0, 50_000.0))
                back = pool.swap(Direction.BASE_IN, pool.swap(Direction.QUOTE_IN, amount).amount_out).amount_out
                assert back <= amount * (1 + 1e-12)

    def test_constant_product_conservation(self):
        """Test |q_vusdc * q_vbtc - k| / k after 1e5 seeded zero-fee swaps."""
        rng = np.random.default_rng(2024)
        pool = UniformPool(1_000_000.0, 100.0)
        k = pool.k
        directions = rng.integers(0, 2, size=100_000)
        fractions = rng.uniform(0.0, 0.01, size=100_000)
        for up, fraction in zip(directions, fractions):
            if up:
                pool.swap(Direction.QUOTE_IN, float(fraction) * pool.q_vusdc)
            else:
                pool.swap(Direction.BASE_IN, float(fraction) * pool.q_vbtc)
        assert abs(pool.q_vusdc * pool.q_vbtc - k) / k <= 1e-9

    def test_exact_out_inverts_exact_in(self):
        """Test that the input quoted for an exact output buys that output."""
        pool = UniformPool(1_000_000.0, 100.0, fee_rate=0.002)
        needed = pool.quote_exact_out(Direction.QUOTE_IN, 2.5).amount_in
        assert pool.simulate_swap(Direction.QUOTE_IN, needed) == pytest.approx(2.5, rel=1e-12)

    def test_exact_out_drain(self):
        """Test that asking for the whole output reserve raises."""
        with pytest.raises(PoolDrainError):
            UniformPool(1_000_000.0, 100.0).swap_exact_out(Direction.QUOTE_IN, 100.0)

    def test_target_price(self):
        """Test that the target-price quote moves the pool onto the target."""
        for target in (12_345.0, 8_000.0):
            pool = UniformPool(1_000_000.0, 100.0, fee_rate=0.001)
            direction, amount = pool.quote_for_target_price(target)
            assert direction is (Direction.QUOTE_IN if target > 10_000.0 else Direction.BASE_IN)
            pool.swap(direction, amount)
            assert pool_price(pool) == pytest.approx(target, rel=1e-9)
