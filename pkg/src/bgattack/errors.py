"""Exception taxonomy shared by every module."""


class BgAttackError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(BgAttackError):
    """Operands disagree on shape, or an input is too small for the operation."""


class ConfigError(BgAttackError):
    """A configuration value violates its documented constraint."""


class CapacityError(BgAttackError):
    """Scene generation could not place all sprites without overlap."""


class CalibrationError(BgAttackError):
    """Detector calibration is impossible (e.g. constant sprite template)."""


class ContractError(BgAttackError):
    """A caller violated an interface precondition (misaligned upstream, t=0)."""


class FormatError(BgAttackError):
    """On-disk container is malformed. Carries the byte offset when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DataError(BgAttackError):
    """Not enough (or degenerate) data to compute the requested statistic."""
