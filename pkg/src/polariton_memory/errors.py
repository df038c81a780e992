"""Exception types shared across the engines."""


class PolaritonMemoryError(Exception):
    """Base class for all library errors."""


class DimensionOverflow(PolaritonMemoryError):
    """A Hilbert-space dimension would exceed the configured hard cap."""


class DimensionMismatch(PolaritonMemoryError):
    pass


class SectorMismatch(PolaritonMemoryError):
    """An operation is not representable in the chosen basis sector."""


class ExcitationOverflow(PolaritonMemoryError):
    pass


class CutoffExceeded(PolaritonMemoryError):
    """Population would leave the truncated excitation space."""


class CutoffLoss(PolaritonMemoryError):
    pass


class ZeroProbability(PolaritonMemoryError):
    """A decoherence event has vanishing probability on the given state."""


class StepTooLarge(PolaritonMemoryError):
    pass


class SingularSchedule(PolaritonMemoryError):
    """Optical-pumping rate diverges for the requested mixing-angle schedule."""


class SeedMissing(PolaritonMemoryError):
    pass


class UnknownScenario(PolaritonMemoryError):
    pass


class ConfigInvalid(PolaritonMemoryError):
    pass


class CutoffWarning(UserWarning):
    """Thermal or Fock tail beyond the excitation cutoff is not negligible."""
