"""Exception hierarchy for the holoshift package."""


class HoloError(Exception):
    """Base class for all holoshift errors."""


class ParseError(HoloError, ValueError):
    """Malformed or truncated image file."""


class UnsupportedFormat(HoloError, ValueError):
    """Image file is valid but uses features this package does not handle."""


class InvalidInput(HoloError, ValueError):
    """Input array or parameter violates an operation's precondition."""


class InvalidShift(HoloError, ValueError):
    """Shift displacement or dimensions incompatible with the shift mode."""


class InvalidConfig(HoloError, ValueError):
    """Unsupported preset or inconsistent configuration."""


class DecodeError(HoloError, ValueError):
    """Corrupt or truncated compressed packet."""


class RateError(HoloError, ValueError):
    """Requested bit budget cannot be met."""


class ExternalCodecError(HoloError, RuntimeError):
    """External compression tool failed or misbehaved."""


class InvalidSubset(HoloError, ValueError):
    """Packet subset indices out of range or repeated."""


class ContainerError(HoloError, ValueError):
    """Corrupt, truncated or unrecognized packet-set container."""
