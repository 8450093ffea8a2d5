"""Exception hierarchy.

Input problems (bad parameters, mismatched shapes, non-finite data) derive
from :class:`InputError`; failures of the numerical machinery derive from
:class:`NumericalError`. The CLI maps the first family to exit code 1 and
the second to exit code 2.
"""


class SimslError(Exception):
    """Base class for every error raised by this package."""


class InputError(SimslError, ValueError):
    """The caller supplied invalid input."""


class ParameterError(InputError):
    pass


class DimensionError(InputError):
    pass


class DataError(InputError):
    pass


class UnknownScenarioError(InputError):
    pass


class NumericalError(SimslError, ArithmeticError):
    """A numerical routine could not produce a usable answer."""


class DegenerateAxisError(NumericalError):
    """All values along a spline axis coincide."""


class SingularityError(NumericalError):
    pass


class SaturatedFitError(NumericalError):
    """Effective degrees of freedom reached the sample size."""


class SelectionError(NumericalError):
    """Every smoothing-parameter candidate failed to fit."""


class IRLSDivergenceError(NumericalError):
    pass


class FlatIndexError(NumericalError):
    """The fitted surface is flat in the index direction, so beta is unidentified."""


class BootstrapUnstableError(NumericalError):
    pass


class BenchmarkFailedError(NumericalError):
    pass
