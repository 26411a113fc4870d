"""Errors raised by ARIMA fitting and order selection."""

from ..errors import NumericalError


class ArimaError(NumericalError):
    """Base class for ARIMA failures."""

    def __init__(self, message: str, order=None):
        """
        Initialize an ArimaError.

        Args:
            message: Error message
            order: The ArimaOrder being fitted, if any
        """
        self.message = message
        self.order = order
        if order is not None:
            super().__init__(f"{message} for ARIMA{order}")
        else:
            super().__init__(message)


class SeriesTooShortError(ArimaError):
    """Fewer observations than 10 * (p + q + 1) after differencing."""


class ConvergenceError(ArimaError):
    """The optimizer hit its iteration cap with a large gradient."""


class NonStationaryError(ArimaError):
    """The estimated AR polynomial has a root on or inside the unit circle."""


class NoCandidateError(ArimaError):
    """No order of the grid produced an accepted fit."""
