"""Per-day accumulation of simulated trading into activity records."""

import datetime as dt
import logging
from typing import List, Tuple

from .records import ActivityRecord, ActivitySeries, SourceTag

logger = logging.getLogger(__name__)


class DailyAccumulator:
    """Collects one day's flows and rolls them into an :class:`ActivityRecord`.

    Volume and liquidations are flows reset at every roll. Leverage, when
    tracked, is the notional-weighted average entry leverage of positions
    opened during the day; a day without openings repeats the previous value.
    """

    def __init__(self, source: SourceTag = SourceTag.SIMULATED, track_leverage: bool = True):
        self.source = source
        self.track_leverage = track_leverage
        self.records: List[ActivityRecord] = []
        self.net_liquidity: List[Tuple[dt.date, float]] = []
        self._last_leverage = {"long": 0.0, "short": 0.0}
        self._reset()

    def _reset(self) -> None:
        self.volume = 0.0
        self.liquidations = {"long": 0.0, "short": 0.0}
        self._opened = {"long": [0.0, 0.0], "short": [0.0, 0.0]}
        self.liquidity_change = 0.0

    def record_trade(self, notional: float) -> None:
        self.volume += abs(notional)

    def record_open(self, side: str, notional: float, leverage: float) -> None:
        """Count a newly opened (or increased) position for the leverage average."""
        weights = self._opened[side]
        weights[0] += abs(notional)
        weights[1] += abs(notional) * leverage

    def record_liquidation(self, side: str, notional: float) -> None:
        self.liquidations[side] += abs(notional)

    def record_liquidity(self, change: float) -> None:
        self.liquidity_change += change

    def _leverage(self, side: str) -> float:
        notional, weighted = self._opened[side]
        if notional > 0:
            self._last_leverage[side] = weighted / notional
        return self._last_leverage[side]

    def roll(self, date: dt.date, oi_long: float, oi_short: float) -> ActivityRecord:
        """
        Close the day.

        Args:
            date: Day being closed
            oi_long: End-of-day long open interest (USD)
            oi_short: End-of-day short open interest (USD)

        Returns:
            The day's ActivityRecord (also appended to ``records``)
        """
        record = ActivityRecord(
            date=date,
            volume=self.volume,
            oi_long=max(oi_long, 0.0),
            oi_short=max(oi_short, 0.0),
            liq_long=self.liquidations["long"],
            liq_short=self.liquidations["short"],
            lev_long=self._leverage("long") if self.track_leverage else None,
            lev_short=self._leverage("short") if self.track_leverage else None,
        )
        self.records.append(record)
        self.net_liquidity.append((date, self.liquidity_change))
        logger.debug("rolled %s: volume %.6g", date, record.volume)
        self._reset()
        return record

    def series(self) -> ActivitySeries:
        return ActivitySeries(tuple(self.records), self.source)
