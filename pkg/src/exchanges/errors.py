"""Errors raised by the exchange engines."""

from typing import Optional

from ..errors import DataError, NumericalError, UsageError


class ExchangeError(NumericalError):
    """Base class for errors raised while an engine processes an event."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.message = message
        self.step = step
        super().__init__(message if step is None else f"{message} at step {step}")


class InvalidOrderError(UsageError):
    """An order violates its own invariants (quantity, limit price, leverage)."""


class OrderRejectedError(ExchangeError):
    """An order could not be executed (e.g. a market order against an empty book)."""

    def __init__(self, order_id: int, reason: str, step: Optional[int] = None):
        self.order_id = order_id
        self.reason = reason
        super().__init__(f"Order {order_id} rejected: {reason}", step)


class PoolCapacityError(ExchangeError):
    """The oracle pool cannot back the open interest a trade would create."""


class OracleFeedError(DataError):
    """No price source has a value for a step."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"All oracle sources are missing at step {step}")
