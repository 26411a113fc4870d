"""Cross-margined trader accounts."""

import math
from dataclasses import dataclass
from typing import Optional


@dataclass
class PerpAccount:
    """One collateral pool backing one net position.

    ``position`` is signed base units (positive = long). ``open_notional``
    is the signed USD cost of the open position: quote paid for a long,
    minus quote received for a short.
    """

    owner: str
    collateral: float = 0.0
    position: float = 0.0
    open_notional: float = 0.0
    realized_pnl: float = 0.0
    funding_paid: float = 0.0
    agent_class: str = ""

    @property
    def side(self) -> Optional[str]:
        if self.position > 0:
            return "long"
        if self.position < 0:
            return "short"
        return None

    @property
    def entry_price(self) -> float:
        return self.open_notional / self.position if self.position else 0.0

    def unrealized_pnl(self, mark: float) -> float:
        return self.position * mark - self.open_notional

    def equity(self, mark: float) -> float:
        return self.collateral + self.unrealized_pnl(mark)

    def notional(self, mark: float) -> float:
        return abs(self.position) * mark

    def margin_ratio(self, mark: float) -> float:
        """``(collateral + unrealized PnL) / |position notional|``; infinite when flat."""
        notional = self.notional(mark)
        return math.inf if notional == 0 else self.equity(mark) / notional

    def apply_trade(self, base_delta: float, quote_delta: float) -> float:
        """
        Book a trade and realize PnL on any part that reduces the position.

        Args:
            base_delta: Base units received (negative when selling)
            quote_delta: Quote received (negative when buying)

        Returns:
            PnL realized by the trade, already credited to collateral
        """
        if base_delta == 0:
            return 0.0
        realized = 0.0
        if self.position == 0 or (self.position > 0) == (base_delta > 0):
            self.position += base_delta
            self.open_notional -= quote_delta
        else:
            closed = min(abs(base_delta), abs(self.position))
            closed_fraction = closed / abs(self.position)
            used_fraction = closed / abs(base_delta)
            realized = used_fraction * quote_delta - closed_fraction * self.open_notional
            if closed_fraction == 1.0:
                self.position, self.open_notional = 0.0, 0.0
            else:
                self.position -= math.copysign(closed, self.position)
                self.open_notional *= 1.0 - closed_fraction
            remainder = 1.0 - used_fraction
            if remainder > 0:
                self.position = base_delta * remainder
                self.open_notional = -quote_delta * remainder
        self.collateral += realized
        self.realized_pnl += realized
        return realized

    def release_margin(self, previous_position: float) -> float:
        """
        Withdraw the collateral share that backed the closed part of a position.

        Call after :meth:`apply_trade` with the position held before it. A
        full close (or flip) withdraws all positive collateral; a partial
        reduction withdraws the closed fraction of it. Negative collateral
        (bad debt) stays on the account.

        Returns:
            The amount withdrawn
        """
        if previous_position == 0 or self.collateral <= 0:
            return 0.0
        if self.position == 0 or (self.position > 0) != (previous_position > 0):
            closed_fraction = 1.0
        else:
            closed_fraction = max(0.0, 1.0 - abs(self.position) / abs(previous_position))
        withdrawn = self.collateral * closed_fraction
        self.collateral -= withdrawn
        return withdrawn
