"""Exception types shared across the toolkit."""


class DegenerateGeometryError(ValueError):
    """Target coincides with an antenna (zero propagation distance)."""


class IdentifiabilityError(ValueError):
    """Scene violates an identifiability requirement (e.g. K >= N)."""


class TargetPassedOriginError(ValueError):
    """State propagation drove the target distance to r <= 0."""


class InsufficientPeaksError(RuntimeError):
    """Fewer local maxima than requested; carries the peaks that were found."""

    def __init__(self, message, found):
        super().__init__(message)
        self.found = found


class NoPeakError(RuntimeError):
    """Spectrum has no strict local maximum."""


class FilterDivergenceError(RuntimeError):
    """EKF innovation covariance became numerically singular.

    Carries the last valid state and the CPI index at which the guard fired.
    """

    def __init__(self, message, last_state=None, cpi_index=None):
        super().__init__(message)
        self.last_state = last_state
        self.cpi_index = cpi_index


class ScenarioValidationError(ValueError):
    """Scenario config rejected before any computation; names the offender."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CoherentSourceWarning(UserWarning):
    """Generated source sequences are coherent (sample covariance rank < K)."""
