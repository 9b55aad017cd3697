"""Exception and warning types shared across the package."""


class ChainlensError(Exception):
    """Base class for all chainlens failures."""


class DataQualityWarning(UserWarning):
    """Dirty but usable input was kept and flagged instead of rejected."""


class MalformedRowError(ChainlensError):
    """A CSV data row could not be parsed; the message names the line."""


class DuplicateCoinDayError(ChainlensError):
    """Two rows share the same (coin key, date)."""

    def __init__(self, offenders):
        self.offenders = list(offenders)
        listing = ", ".join(f"({key}, {day})" for key, day in self.offenders)
        super().__init__(f"duplicate coin-day rows: {listing}")


class ApiError(ChainlensError):
    """History API request failed."""


class AuthenticationError(ApiError):
    """The API rejected the credentials."""


class RateLimitError(ApiError):
    """Retries were exhausted while the API kept throttling."""


class SchemaDriftError(ApiError):
    """An API response payload is missing an expected field."""

    def __init__(self, field, context=""):
        self.field = field
        detail = f" in {context}" if context else ""
        super().__init__(f"history payload is missing field {field!r}{detail}")


class UndefinedCorrelationError(ChainlensError):
    """The requested coefficient is undefined for this input."""


class InfeasibleSpecError(ChainlensError):
    """A synthetic-data spec cannot be realized exactly."""
