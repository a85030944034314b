"""Exception hierarchy.

The CLI maps these onto exit codes: parameter errors are usage errors (2),
data errors are 3 and numerical failures are 4.
"""


class KsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(KsError, ValueError):
    """An argument lies outside the domain of the operation."""


class DataError(KsError, ValueError):
    """Observations cannot be used (non-numeric, non-finite, empty)."""


class NumericalError(KsError, ArithmeticError):
    """A numerical routine failed (quadrature, factorisation, bracketing)."""


class FitError(NumericalError):
    """A maximum likelihood fit failed or hit a degenerate sample."""
