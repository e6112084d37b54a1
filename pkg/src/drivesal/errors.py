"""Exception hierarchy shared across the package."""


class DrivesalError(Exception):
    pass


class DimensionError(DrivesalError, ValueError):
    """Shapes or extents do not agree."""


class ArgumentError(DrivesalError, ValueError):
    """An argument is outside its allowed range (empty input, bad factor, ...)."""


class DomainError(DrivesalError, ValueError):
    """A value is outside a function's mathematical domain."""


class DegenerateInputError(DrivesalError, ValueError):
    """Zero variance or zero mass where a statistic needs it."""


class ContractError(DrivesalError, ValueError):
    """An input violates a documented precondition (e.g. unnormalized map)."""


class NumericError(DrivesalError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class ConfigError(DrivesalError, ValueError):
    pass


class FormatError(DrivesalError, ValueError):
    """A file or stream does not match its expected format."""


class TelemetryLookupError(DrivesalError, LookupError):
    """No telemetry sample is close enough to the requested time."""
