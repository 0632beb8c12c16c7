"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class QScatterError(Exception):
    """Base class for every error raised by the package."""


class NonConvergence(QScatterError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""

    def __init__(self, message: str, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class StiffnessFailure(QScatterError):
    """ODE step size underflowed; usually a density node sits on the path."""


class BoundaryContamination(QScatterError):
    """The reference evolver's wavefunction reached the hard-wall edges."""


class NodeProximity(QScatterError):
    """Velocity requested where the density is below the floor."""


class TruncationTooTight(QScatterError):
    """Time horizon too short to capture the arrival-time distribution."""


class ConfigError(QScatterError):
    """Invalid run configuration."""
