"""Exception types raised across the package.

Most bad-argument cases raise plain ``ValueError``; the classes below exist
where callers (or the command line) need to tell failures apart.
"""


class ParityQVError(Exception):
    """Base class for package-specific failures."""


class NumericalError(ParityQVError, ArithmeticError):
    pass


class ParseError(ParityQVError, ValueError):
    """Malformed or version-mismatched serialized circuit."""


class UnitarityError(ParseError):
    """A deserialized gate is not unitary to tolerance."""


class ResourceLimitError(ParityQVError, MemoryError):
    """Requested simulation exceeds the configured qubit cap."""


class ExtractionUndefinedError(ParityQVError, ValueError):
    """Heavy-output value too close to its floor to invert for an exponent."""


class FitError(ParityQVError, ValueError):
    pass


class UnsupportedEstimationError(ParityQVError, ValueError):
    pass


class ConfigError(ParityQVError, ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
