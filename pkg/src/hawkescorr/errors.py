"""Exception types shared across the package."""


class HawkesError(Exception):
    """Base class for all errors raised by hawkescorr."""


class StabilityError(HawkesError, ValueError):
    """The kernel violates the stability assumption ||Phi||_1 < 1."""


class NumericalError(HawkesError, ArithmeticError):
    """A computation produced non-finite values."""


class HorizonError(HawkesError, ValueError):
    """A requested time lies outside the tabulated horizon."""


class ConsistencyError(HawkesError, AssertionError):
    """Two independent computation routes disagree."""


class UnsupportedKernelError(HawkesError, ValueError):
    """The kernel shape is not supported by the requested algorithm."""
