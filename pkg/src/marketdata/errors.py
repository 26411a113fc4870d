"""Errors raised while building or ingesting market data."""

import datetime as dt
from typing import Iterable, Optional

from ..errors import DataError


class MarketDataError(DataError):
    """Base class for market data validation errors."""

    def __init__(self, message: str, row: Optional[int] = None):
        """
        Initialize a MarketDataError.

        Args:
            message: Error message
            row: 1-indexed data row (header excluded) where the error occurred
        """
        self.message = message
        self.row = row
        if row is not None:
            super().__init__(f"{message} at row {row}")
        else:
            super().__init__(message)


class MalformedRowError(MarketDataError):
    """A row could not be read (wrong arity, bad number, bad date)."""


class HeaderError(MarketDataError):
    """The header row is not one of the accepted layouts."""


class OHLCInconsistencyError(MarketDataError):
    """Prices violate low <= open/close <= high or are not positive."""


class DuplicateDateError(MarketDataError):
    """The same date appears twice, or dates go backwards."""


class NegativeValueError(MarketDataError):
    """A USD amount or leverage multiple is negative or not finite."""


class OpenInterestMismatchError(MarketDataError):
    """A CEX-origin record has different long and short open interest."""


class MissingValuesError(MarketDataError):
    """A column requested for analysis has absent values."""


class DateGapError(MarketDataError):
    """A series skips one or more calendar days."""

    def __init__(self, missing: dt.date, row: Optional[int] = None):
        self.missing = missing
        super().__init__(f"Missing day {missing.isoformat()}", row)


class TransportError(MarketDataError):
    """The remote feed could not be reached or answered with an error."""


class SchemaMappingError(MarketDataError):
    """Mapped response fields were not found in the remote payload."""

    def __init__(self, unmatched: Iterable[str]):
        self.unmatched = sorted(unmatched)
        super().__init__(f"Unmatched fields in response: {', '.join(self.unmatched)}")


class PartialDataError(MarketDataError):
    """The remote feed returned fewer days than requested."""

    def __init__(self, missing: Iterable[dt.date]):
        self.missing = sorted(missing)
        listed = ", ".join(day.isoformat() for day in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"Remote feed is missing {len(self.missing)} day(s): {listed}{more}")
