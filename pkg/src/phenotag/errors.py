"""Exception types shared across the package."""


class PhenotagError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PhenotagError):
    """A file could not be parsed; the message names the offending line."""


class ValidationError(PhenotagError):
    """Input data violates a documented invariant."""


class ConfigurationError(PhenotagError):
    """A configuration value is out of range or inconsistent."""


class CapacityError(ConfigurationError):
    """A vocabulary expansion exceeds the available placeholder budget."""


class TrainingError(PhenotagError):
    """Training aborted, e.g. on a non-finite loss."""
