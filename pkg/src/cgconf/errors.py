"""Exception types shared across the package."""


class CgconfError(Exception):
    """Base class for all library errors."""


class ChartDomainError(CgconfError, ValueError):
    """Point lies outside the chart domain of a manifold model."""


class ConditioningError(CgconfError, ArithmeticError):
    """A metric (or other linear system) is too close to singular."""


class DegeneratePlaneError(CgconfError, ValueError):
    """The two vectors do not span a plane section."""


class InvalidDilatationError(CgconfError, ValueError):
    """A dilatation-style scalar field is not strictly positive."""


class BasePointMismatchError(CgconfError, ValueError):
    """Two bundle tangents do not share a base point."""


class NotImmersionError(CgconfError, ValueError):
    """Jacobian is rank deficient where an immersion is required."""


class OffSphereError(CgconfError, ValueError):
    """A point or image expected to lie on a sphere does not."""


class DegenerateSampleError(CgconfError, ValueError):
    """Random sampling kept producing degenerate denominators."""


class NotConformalError(CgconfError, ValueError):
    """The base map failed the conformality test the operation requires."""


class FormRejectedError(CgconfError, ValueError):
    """A bilinear form fails the coefficient condition; carries a witness."""

    def __init__(self, message, witness=None, residual=None):
        super().__init__(message)
        self.witness = witness
        self.residual = residual


class UnknownScenarioError(CgconfError, KeyError):
    """Requested scenario name is not in the registry."""
