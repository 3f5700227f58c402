"""Exception types shared by the library modules and the command line."""


class IgaError(Exception):
    """Base class for all errors raised by this package"""


class ConfigError(IgaError, ValueError):
    """Invalid experiment configuration or command line override"""


class NumericalError(IgaError):
    """A computation could not produce a trustworthy result"""


class SingularCoefficientError(NumericalError):
    """The reaction coefficient is not finite at a quadrature node"""

    def __init__(self, node: float, element: int, value: float):
        self.node = node
        self.element = element
        self.value = value
        super().__init__(
            f"coefficient is not finite (value={value}) at quadrature node x={node!r} "
            f"of element {element}"
        )


class DefinitenessError(NumericalError):
    """The mass matrix is not positive definite"""


class TauSweepError(NumericalError):
    """The leading dispersion coefficient does not change sign on the τ grid"""


class MultiplicityError(IgaError, ValueError):
    """An eigenfunction comparison was requested for a degenerate eigenvalue"""


class NoBuiltinOptimumError(IgaError, ValueError):
    """No tabulated optimal blending parameter exists for the requested degree"""
