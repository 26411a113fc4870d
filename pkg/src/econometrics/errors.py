"""Errors raised by the regression machinery."""

import datetime as dt
from typing import Iterable, Optional

from ..errors import DataError, NumericalError, UsageError


class RankDeficiencyError(NumericalError):
    """The design matrix does not have full column rank."""

    def __init__(self, columns: Iterable[str]):
        """
        Initialize a RankDeficiencyError.

        Args:
            columns: Names of the columns involved in the collinearity
        """
        self.columns = list(columns)
        super().__init__(f"Rank-deficient design: collinear columns {', '.join(self.columns)}")


class InsufficientObservationsError(NumericalError):
    """Fewer rows than parameters plus one."""

    def __init__(self, rows: int, required: int):
        self.rows = rows
        self.required = required
        super().__init__(f"{rows} observations, need at least {required}")


class DateMisalignmentError(DataError):
    """Series that must share dates do not."""

    def __init__(self, message: str, date: Optional[dt.date] = None):
        self.date = date
        where = f" on {date.isoformat()}" if date is not None else ""
        super().__init__(f"{message}{where}")


class MissingRosterEntryError(DataError):
    """A regressor of the model is not among the decomposed series."""

    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(missing)
        super().__init__(f"Decomposed series missing for: {', '.join(self.missing)}")


class RosterViolationError(UsageError):
    """A model roster includes regressors its exchange kind cannot have."""


class UnsupportedModelError(UsageError):
    """The requested model needs data the exchange does not produce."""


class NoUsableLagError(NumericalError):
    """Every lag order of the search failed."""
