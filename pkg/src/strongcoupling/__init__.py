"""Strong-coupling (dual Dyson) expansion for driven and quantized two-level systems."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    NonCommutingPerturbationError,
    NumericalError,
    ProvenanceError,
    StiffnessError,
    TruncationGuardError,
    TruncationTailError,
)
from .models import dicke, driven_two_level, quantum_rabi  # noqa: E402
from .rg import build_envelope  # noqa: E402

__all__ = [
    "ConfigError",
    "DomainError",
    "NonCommutingPerturbationError",
    "NumericalError",
    "ProvenanceError",
    "StiffnessError",
    "TruncationGuardError",
    "TruncationTailError",
    "build_envelope",
    "dicke",
    "driven_two_level",
    "quantum_rabi",
]
