"""Exception hierarchy.

Two families matter to callers: ``ConfigError`` (bad input, CLI exit 1) and
``NumericalError`` (guard violations, integrator failure, CLI exit 2).
"""


class ConfigError(ValueError):
    """Invalid user input or configuration."""


class NumericalError(RuntimeError):
    """A computation could not be carried out to the requested accuracy."""


class DomainError(ValueError):
    """Argument outside the domain a special function supports."""


class BasisMismatchError(ValueError):
    """Arithmetic between objects defined on different labeled bases."""


class ProvenanceError(ValueError):
    """Pipeline objects that were not derived from the same decomposition."""


class TruncationGuardError(NumericalError):
    """The Fock truncation cannot hold the displaced states in play."""


class TruncationTailError(NumericalError):
    """A harmonic expansion was cut off with too much weight in the tail."""


class StiffnessError(NumericalError):
    """Step size underflow in the adaptive integrator."""


class NonCommutingPerturbationError(ValueError):
    """Perturbation terms do not share an eigenbasis (time-dependent eigenvectors)."""
