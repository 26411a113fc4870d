"""Clearing house: routes trader positions through a VAMM pool.

Opening a long pays ``margin * leverage`` vUSDC into the pool for vBTC;
opening a short sells exactly enough vBTC to receive that notional. Closing
reverses the swap against the pool at its then-current curve, so profit and
loss come from price moves of the pool itself. Accounts are cross-margined;
reducing or closing a position withdraws the collateral that backed the
closed part.
"""

import itertools
import logging
import math
from dataclasses import replace
from typing import Dict, List, Optional, Protocol

from ..errors import MarginCheckError
from ..exchanges.orders import Fill, LiquidationEvent, Side
from ..marketdata.accumulator import DailyAccumulator
from ..marketdata.records import SourceTag
from .accounts import PerpAccount
from .concentrated import ConcentratedPool, LiquidityPosition
from .errors import NegativeAmountError, PoolDrainError
from .pool import Direction, SwapResult, VammPool

logger = logging.getLogger(__name__)

DEFAULT_INITIAL_MARGIN = 0.10
DEFAULT_MAINTENANCE_MARGIN = 0.0625
# Slack on the opening check so a position at exactly the leverage cap passes.
MARGIN_RTOL = 1e-12
# Agent class stamped on the fills that settle an LP's net exposure.
LP_AGENT_CLASS = "liquidity_provider"


class FundingHook(Protocol):
    def payments(self, accounts: Dict[str, PerpAccount], mark: float, index: float) -> Dict[str, float]:
        """USD each account pays (negative: receives) at one settlement."""


class ZeroFunding:
    """Funding settlement that transfers nothing."""

    def payments(self, accounts: Dict[str, PerpAccount], mark: float, index: float) -> Dict[str, float]:
        return {owner: 0.0 for owner in accounts}


class ClearingHouse:
    """Single-writer state machine over one pool and its accounts."""

    def __init__(
        self,
        pool: VammPool,
        initial_margin: float = DEFAULT_INITIAL_MARGIN,
        maintenance_margin: float = DEFAULT_MAINTENANCE_MARGIN,
        funding: Optional[FundingHook] = None,
        accumulator: Optional[DailyAccumulator] = None,
    ):
        if not 0 < maintenance_margin <= initial_margin <= 1:
            raise ValueError(
                f"margins must satisfy 0 < maintenance <= initial <= 1, got {maintenance_margin}, {initial_margin}"
            )
        self.pool = pool
        self.initial_margin = initial_margin
        self.maintenance_margin = maintenance_margin
        self.funding = funding or ZeroFunding()
        self.accumulator = accumulator or DailyAccumulator(SourceTag.VAMM, track_leverage=False)
        self.accounts: Dict[str, PerpAccount] = {}
        self.fills: List[Fill] = []
        self.liquidations: List[LiquidationEvent] = []
        self.step = 0
        self._order_ids = itertools.count(1)

    @property
    def max_leverage(self) -> float:
        return 1.0 / self.initial_margin

    @property
    def mark_price(self) -> float:
        return self.pool.price

    def account(self, owner: str, agent_class: str = "") -> PerpAccount:
        if owner not in self.accounts:
            self.accounts[owner] = PerpAccount(owner, agent_class=agent_class)
        return self.accounts[owner]

    @property
    def oi_long(self) -> float:
        return math.fsum(a.open_notional for a in self.accounts.values() if a.position > 0)

    @property
    def oi_short(self) -> float:
        return math.fsum(-a.open_notional for a in self.accounts.values() if a.position < 0)

    @property
    def base_credited(self) -> float:
        return math.fsum(a.position for a in self.accounts.values())

    # -- trading ------------------------------------------------------------

    def open_position(
        self, owner: str, side: Side, margin: float, leverage: float, agent_class: str = ""
    ) -> Fill:
        """
        Deposit ``margin`` and trade ``margin * leverage`` USD of notional.

        Args:
            owner: Account owner
            side: BUY opens or adds to a long, SELL a short
            margin: Collateral deposited with the order (USD)
            leverage: Notional over margin

        Returns:
            The fill at the swap's average price

        Raises:
            NegativeAmountError: ``margin`` is not positive
            MarginCheckError: Leverage above the cap, or the account would fall
                below the initial margin at the fill price
            PoolDrainError: The pool cannot deliver the swap
        """
        side = Side(side)
        if not (math.isfinite(margin) and margin > 0):
            raise NegativeAmountError(f"margin must be > 0, got {margin!r}")
        if not (leverage > 0 and leverage <= self.max_leverage * (1 + MARGIN_RTOL)):
            raise MarginCheckError(owner, 1.0 / leverage if leverage > 0 else 0.0, self.initial_margin)

        notional = margin * leverage
        if side is Side.BUY:
            result = self.pool.quote(Direction.QUOTE_IN, notional)
            base_delta, quote_delta = result.amount_out, -notional
            exact_out = False
        else:
            result = self.pool.quote_exact_out(Direction.BASE_IN, notional)
            base_delta, quote_delta = -result.amount_in, notional
            exact_out = True

        account = self.account(owner, agent_class)
        trial = replace(account)
        trial.apply_trade(base_delta, quote_delta)
        trial.release_margin(account.position)
        trial.collateral += margin
        ratio = trial.margin_ratio(result.average_price)
        if ratio < self.initial_margin * (1 - MARGIN_RTOL):
            raise MarginCheckError(owner, ratio, self.initial_margin)

        self._execute(result, exact_out)
        previous = account.position
        account.apply_trade(base_delta, quote_delta)
        account.release_margin(previous)
        account.collateral += margin
        self.accumulator.record_trade(notional)
        return self._fill(owner, side, result, abs(base_delta), account.agent_class)

    def close_position(self, owner: str, liquidation: bool = False) -> Optional[Fill]:
        """
        Close the owner's whole position against the pool.

        Returns:
            The closing fill, or None when the account is flat
        """
        account = self.accounts.get(owner)
        if account is None or account.position == 0:
            return None
        if account.position > 0:
            size = account.position
            result = self.pool.quote(Direction.BASE_IN, size)
            base_delta, quote_delta, side = -size, result.amount_out, Side.SELL
            exact_out = False
        else:
            size = -account.position
            result = self.pool.quote_exact_out(Direction.QUOTE_IN, size)
            base_delta, quote_delta, side = size, -result.amount_in, Side.BUY
            exact_out = True
        self._execute(result, exact_out)
        previous = account.position
        account.apply_trade(base_delta, quote_delta)
        account.release_margin(previous)
        self.accumulator.record_trade(quote_delta)
        return self._fill(owner, side, result, size, account.agent_class, liquidation)

    def _execute(self, result: SwapResult, exact_out: bool) -> None:
        if exact_out:
            self.pool.swap_exact_out(result.direction, result.amount_out)
        else:
            self.pool.swap(result.direction, result.amount_in)

    def _fill(
        self, owner: str, side: Side, result: SwapResult, qty: float, agent_class: str, liquidation: bool = False
    ) -> Fill:
        fill = Fill(
            step=self.step,
            order_id=next(self._order_ids),
            side=side,
            price=result.average_price,
            qty=qty,
            owner=owner,
            agent_class=agent_class,
            liquidation=liquidation,
        )
        self.fills.append(fill)
        return fill

    # -- liquidity ----------------------------------------------------------

    def add_liquidity(self, owner: str, price_lower: float, price_upper: float, **kwargs) -> LiquidityPosition:
        """Open an LP position on the pool and count its value as added liquidity."""
        pool = self._concentrated()
        position = pool.add_liquidity(owner, price_lower, price_upper, step=self.step, **kwargs)
        self.accumulator.record_liquidity(position.value(pool.spot_price()))
        return position

    def remove_liquidity(self, position_id: int, liquidation: bool = False) -> LiquidityPosition:
        """Withdraw an LP position, settling its net base exposure against the pool."""
        pool = self._concentrated()
        position, base, quote = pool.remove_liquidity(position_id)
        price = pool.spot_price()
        self.accumulator.record_liquidity(-(base * price + quote))
        self._settle_lp_exposure(position, base - position.deposit_base, liquidation)
        return position

    def _concentrated(self) -> ConcentratedPool:
        if not isinstance(self.pool, ConcentratedPool):
            raise TypeError("liquidity positions need a concentrated pool")
        return self.pool

    def _settle_lp_exposure(self, position: LiquidityPosition, net_base: float, liquidation: bool = False) -> float:
        """Trade away an LP's net base against the pool; falls back to the mark when the pool is dry."""
        if net_base == 0:
            return self.pool.spot_price()
        try:
            if net_base < 0:
                result = self.pool.swap_exact_out(Direction.QUOTE_IN, -net_base)
            else:
                result = self.pool.swap(Direction.BASE_IN, net_base)
        except PoolDrainError:
            logger.warning("pool cannot absorb LP %s exposure; settling at mark", position.owner)
            return self.pool.spot_price()
        self.accumulator.record_trade(abs(net_base) * result.average_price)
        side = Side.BUY if net_base < 0 else Side.SELL
        self._fill(position.owner, side, result, abs(net_base), LP_AGENT_CLASS, liquidation)
        return result.average_price

    # -- risk ---------------------------------------------------------------

    def liquidate_sweep(self, mark_price: Optional[float] = None) -> List[LiquidationEvent]:
        """
        Close every account and leveraged LP position below maintenance margin.

        Eligibility is judged at ``mark_price`` (the pool price when omitted);
        closures trade against the pool. Each event is recorded as soon as its
        close succeeds. An account the pool cannot absorb stays open and is
        retried at the next sweep.

        Returns:
            Liquidation events in owner order, traders before LPs
        """
        mark = self.pool.price if mark_price is None else mark_price
        events: List[LiquidationEvent] = []
        for owner in sorted(self.accounts):
            account = self.accounts[owner]
            if account.position == 0:
                continue
            ratio = account.margin_ratio(mark)
            if ratio >= self.maintenance_margin:
                continue
            side = account.side
            try:
                fill = self.close_position(owner, liquidation=True)
            except PoolDrainError as e:
                logger.warning("cannot liquidate %s: %s", owner, e)
                continue
            self._record_liquidation(
                LiquidationEvent(self.step, owner, "trader", side, fill.notional, fill.price, ratio), events
            )

        if isinstance(self.pool, ConcentratedPool):
            leveraged = [p for p in self.pool.positions.values() if p.leverage > 1]
            for position in sorted(leveraged, key=lambda p: (p.owner, p.position_id)):
                ratio = position.margin_ratio(mark)
                if ratio >= self.maintenance_margin:
                    continue
                net_base = position.net_base(self.pool.spot_price())
                self.remove_liquidity(position.position_id, liquidation=True)
                side = "short" if net_base < 0 else "long"
                self._record_liquidation(
                    LiquidationEvent(self.step, position.owner, "lp", side, abs(net_base) * mark, mark, ratio), events
                )
        return events

    def _record_liquidation(self, event: LiquidationEvent, events: List[LiquidationEvent]) -> None:
        self.accumulator.record_liquidation(event.side, event.notional)
        self.liquidations.append(event)
        events.append(event)
        logger.info("liquidated %s %s (%s) at %.6g", event.kind, event.owner, event.side, event.price)

    def settle_funding(self, index_price: float) -> Dict[str, float]:
        """Apply one funding settlement from the configured hook."""
        payments = self.funding.payments(self.accounts, self.mark_price, index_price)
        for owner, amount in payments.items():
            account = self.accounts[owner]
            account.collateral -= amount
            account.funding_paid += amount
        return payments

    def roll_day(self, date):
        """Close the day's aggregates with the current open interest."""
        return self.accumulator.roll(date, self.oi_long, self.oi_short)
