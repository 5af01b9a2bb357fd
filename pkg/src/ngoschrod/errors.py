"""Exception types raised across the package."""


class InvalidDomainError(ValueError):
    """Bounds of an axis are not finite or not increasing."""


class InvalidHorizonError(ValueError):
    """Final time must be positive."""


class SamplingError(ValueError):
    """A coefficient function returned non-finite samples."""


class RecoveryRegionError(ValueError):
    """Requested recovery coordinate lies below the admissible threshold."""


class DegenerateCorrectionError(ValueError):
    """Initial-layer correction has a vanishing denominator."""


class UnsupportedError(ValueError):
    """Input outside the supported model class."""


class MollifierResolutionError(ValueError):
    """Mollifier width smaller than the grid step."""


class CapExceededError(ValueError):
    """Requested problem size exceeds the configured desk-scale cap."""
