"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ResgenError(Exception):
    exit_code = 1


class ValidationError(ResgenError, ValueError):
    """Invalid argument, record, or configuration value."""

    exit_code = 1


class ConfigError(ValidationError):
    exit_code = 1


class DomainError(ValidationError):
    """Argument outside the domain a numerical kernel supports."""


class BoundsError(ValidationError, IndexError):
    pass


class FormatError(ValidationError):
    """Malformed file (bad NPY magic, header, or shape)."""


class NumericError(ResgenError, ArithmeticError):
    exit_code = 2


class SamplingError(ResgenError):
    """A rejection sampler exhausted its retry budget."""

    exit_code = 2


class OutputError(ResgenError, OSError):
    exit_code = 3
