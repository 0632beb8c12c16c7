"""Wavepacket scattering by the reflectionless sech^2 potential (nu = 1)."""

__version__ = "0.1.0"

from .errors import (BoundaryContamination, ConfigError, NodeProximity, NonConvergence,  # noqa: E402
                     QScatterError, StiffnessFailure, TruncationTooTight)
from .model import (DEFAULT_PARAMS, SCALED, Family, PacketParams, ScaledUnits,  # noqa: E402
                    WaveField)
from .numerics import GridSpec, OdeSpec, QuadratureSpec, Trajectory  # noqa: E402
from .observables import make_field, moments, normalize  # noqa: E402
from .arrival import ArrivalRecord, arrival_distribution, detector_sweep, mean_arrival  # noqa: E402
from .bohmian import EnsembleSpec, run_ensemble, velocity  # noqa: E402

__all__ = [
    "ArrivalRecord", "BoundaryContamination", "ConfigError", "EnsembleSpec", "Family",
    "GridSpec", "NodeProximity", "NonConvergence", "OdeSpec", "DEFAULT_PARAMS", "PacketParams",
    "QScatterError", "QuadratureSpec", "SCALED", "ScaledUnits", "StiffnessFailure",
    "Trajectory", "TruncationTooTight", "WaveField", "arrival_distribution", "detector_sweep",
    "make_field", "mean_arrival", "moments", "normalize", "run_ensemble", "velocity",
]
