"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HorizonWalkError(Exception):
    """Base class for every error raised by this package."""


class OutOfDomain(HorizonWalkError, ValueError):
    """A point lies outside the chart's coordinate box."""


class NumericalDegeneracy(HorizonWalkError, ArithmeticError):
    """The metric (or a frame built from it) is numerically singular."""


class DomainExit(HorizonWalkError):
    """A geodesic left the chart domain during integration."""


class StepTooLarge(HorizonWalkError, ValueError):
    """Integrator step exceeds the configured tolerance policy."""


class GeodesicTooLong(HorizonWalkError, ValueError):
    """Requested arclength exceeds ``GeodesicConfig.max_arclength``."""


class SingularFrame(HorizonWalkError, ArithmeticError):
    """A frame matrix is not invertible."""


class OrthonormalityDrift(HorizonWalkError):
    """Frame left the orthonormal set by more than the drift tolerance."""


class InsufficientSamples(HorizonWalkError, ValueError):
    pass


class FitDegenerate(HorizonWalkError):
    """Every error in a convergence sweep sits below the numerical floor."""


class UnsupportedFunction(HorizonWalkError, ValueError):
    pass


class TooFewReplicas(HorizonWalkError, ValueError):
    pass


class ParseError(HorizonWalkError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(HorizonWalkError, ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
