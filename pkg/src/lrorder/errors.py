"""Exception hierarchy shared across the package."""


class LROError(Exception):
    """Base class for all errors raised by :mod:`lrorder`."""


class InvalidInputError(LROError, ValueError):
    """Malformed input: empty sequences, bad weights, out-of-range indices."""


class DomainError(LROError, ValueError):
    """A function was evaluated outside the domain where it is defined."""


class DegenerateOrderError(LROError, ValueError):
    """Every y value is at or below every x value (largest y <= smallest x).

    The estimator needs at least one pair with X_i < Y_j.
    """


class UndefinedNuisanceError(LROError, ValueError):
    """A nuisance quantity (variance, density, slope) could not be estimated."""


class UnsupportedPointError(LROError, ValueError):
    """The requested method does not provide an interval at this point."""


class QuantileTableError(LROError, KeyError):
    """A quantile level is missing from the embedded table."""
