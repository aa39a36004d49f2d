"""Exception hierarchy.

Two families matter to the CLI: configuration problems (exit code 2) and
data problems (exit code 3). Everything else propagates as a normal crash.
"""


class DgeError(Exception):
    """Base class for all library errors."""


class ConfigError(DgeError):
    """Invalid configuration or specification values."""


class BadSpec(ConfigError):
    pass


class DataError(DgeError):
    """Input data violates a precondition of the operation."""


class IoError(DataError, OSError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaMismatch(DataError):
    pass


class MissingLabel(DataError):
    pass


class EmptyClass(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class InsufficientData(DataError):
    pass


class SingularCovariance(DataError):
    pass


class UnsupportedSchema(DataError):
    pass


class SingleClassTrainingSet(DataError):
    pass


class NonFiniteLoss(DataError):
    pass


class ManifestMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class InsufficientSamples(DataError):
    pass


class InsufficientDatasets(DataError):
    pass


class DimensionError(DataError):
    pass


class NoSubgroups(DataError):
    pass


def annotate(err: DgeError, prefix: str, **attrs) -> DgeError:
    """A copy of ``err`` (same type and attributes) whose message starts with ``prefix``."""
    new = type(err).__new__(type(err))
    Exception.__init__(new, f"{prefix}: {err}")
    new.__dict__.update(err.__dict__)
    new.__dict__.update(attrs)
    return new
