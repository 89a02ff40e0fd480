"""Exception types raised across the toolkit."""


class AerialSynthError(Exception):
    """Base class; carries the CLI exit code for its family."""

    exit_code = 3


class ConfigError(AerialSynthError, ValueError):
    exit_code = 2


class DataError(AerialSynthError, ValueError):
    exit_code = 3


class DegenerateGeometryError(DataError):
    pass


class MalformedMaskError(DataError):
    pass


class EmptyVehicleError(DataError):
    pass


class TooCoarseError(DataError):
    pass


class TooSmallError(DataError):
    pass


class EmptyPoolError(DataError):
    pass


class UndefinedAPError(DataError):
    pass
