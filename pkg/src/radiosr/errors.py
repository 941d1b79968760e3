"""Exception types raised across the package."""


class RadioSRError(Exception):
    """Base class for all package errors."""


class NegativePower(RadioSRError, ValueError):
    pass


class BadMagic(RadioSRError, ValueError):
    pass


class TruncatedFile(RadioSRError, ValueError):
    pass


class DimensionMismatch(RadioSRError, ValueError):
    pass


class ValueOutOfRange(RadioSRError, ValueError):
    pass


class GridTooSmall(RadioSRError, ValueError):
    pass


class BadThresholds(RadioSRError, ValueError):
    pass


class IndivisibleStride(RadioSRError, ValueError):
    pass


class SourceTooSmall(RadioSRError, ValueError):
    pass


class PlacementFailure(RadioSRError, RuntimeError):
    pass


class KindMismatch(RadioSRError, ValueError):
    pass


class DegenerateAlphaBar(RadioSRError, ValueError):
    pass


class TimeOutOfRange(RadioSRError, ValueError):
    pass


class BadTimeStep(RadioSRError, ValueError):
    pass


class ZeroReference(RadioSRError, ValueError):
    pass


class MomentCheckFailed(RadioSRError, RuntimeError):
    pass


class ConfigError(RadioSRError, ValueError):
    pass
