"""Exception types shared across the package."""


class RadiativeTransferError(Exception):
    """Base class for all rtlab errors."""


class DomainError(RadiativeTransferError):
    """A point or ray segment lies outside the computational domain."""


class ConfigurationError(RadiativeTransferError):
    """Invalid configuration value (quadrature order, step size, JSON spec, ...)."""


class ConvergenceError(RadiativeTransferError):
    """Fixed-point iteration failed to converge; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class GaugeValidationError(RadiativeTransferError):
    """Gauge field violates a structural requirement (boundary value, positivity)."""


class NotGaugeEquivalentError(RadiativeTransferError):
    """Absorption difference has nonvanishing full line integrals."""

    def __init__(self, message, max_violation=None):
        super().__init__(message)
        self.max_violation = max_violation


class ParallelDirectionsError(RadiativeTransferError):
    """Direction pair too close to parallel for a broken-ray construction."""


class ResolutionError(RadiativeTransferError):
    """Mollifier width below the resolution of the backing discretization."""


class DataError(RadiativeTransferError):
    """Reconstruction input data violates a positivity or shape requirement."""


class DataInconsistencyError(DataError):
    """Input data inconsistent beyond the negativity clamp tolerance."""


class HypothesisError(RadiativeTransferError):
    """A reconstruction hypothesis (kernel symmetry, positivity) fails."""
