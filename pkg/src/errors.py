"""Exception roots shared by every perplab subsystem."""


class PerpLabError(Exception):
    """Base class for all perplab errors.

    Each subclass family maps onto a stable CLI exit code.
    """

    exit_code = 3


class UsageError(PerpLabError):
    """Bad invocation or configuration."""

    exit_code = 1


class DataError(PerpLabError):
    """Input data failed validation."""

    exit_code = 2


class NumericalError(PerpLabError):
    """A numerical procedure could not produce a trustworthy answer."""

    exit_code = 3


class MarginCheckError(PerpLabError):
    """Raised when an account would not meet its margin requirement."""

    exit_code = 2

    def __init__(self, owner: str, margin_ratio: float, required: float):
        """
        Initialize a MarginCheckError.

        Args:
            owner: Account owner
            margin_ratio: Margin ratio the account would have after the trade
            required: Minimum ratio that had to be met
        """
        self.owner = owner
        self.margin_ratio = margin_ratio
        self.required = required
        super().__init__(
            f"Margin check failed for {owner!r}: ratio {margin_ratio:.6g} below {required:.6g}"
        )
