"""Errors raised by the virtual AMM engine."""

from typing import Optional

from ..errors import NumericalError, UsageError


class PoolDrainError(NumericalError):
    """A swap would take the pool's whole output reserve (or find no liquidity)."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        super().__init__(message if step is None else f"{message} at step {step}")


class EmptyReserveError(NumericalError):
    """The pool's base reserve is zero, so its price is undefined."""


class NegativeAmountError(UsageError):
    """A swap or liquidity amount is negative."""


class InvertedRangeError(UsageError):
    """A liquidity range has P_A >= P_B."""


class InconsistentAmountsError(UsageError):
    """Deposited amounts do not match the in-range composition at the current price."""


class EmptyGridError(UsageError):
    """A price grid has fewer than two edges."""


class UnknownPositionError(UsageError):
    """No liquidity position has the requested id."""
