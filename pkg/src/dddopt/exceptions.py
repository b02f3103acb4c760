"""Error types raised across the package.

Everything derives from DddoptError so callers (and the CLI) can catch one base
class and still tell failure modes apart by subclass.
"""


class DddoptError(Exception):
    """Base class for all package errors."""


class DivisibilityError(DddoptError):
    """Partition counts do not divide the data dimensions."""


class DimensionError(DddoptError):
    """Operand shapes are inconsistent with the grid."""


class ParseError(DddoptError):
    """A dataset file is malformed.

    Carries the 1-based line number and, when known, the token offset within
    the line, so error messages point at the exact spot.
    """

    def __init__(self, message, line=None, offset=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", token {offset}" if offset is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.offset = offset


class LabelError(DddoptError):
    """Labels are invalid for the requested task."""


class EmptyDataError(DivisibilityError):
    """Dataset has no observations, so no partitioning is possible."""


class SubsetError(DddoptError):
    """A mask set is not contained in its required superset."""


class SizeError(DddoptError):
    """A sample size is outside its valid range."""


class FractionError(DddoptError):
    """A sampling fraction is outside (0, 1]."""


class ConfigError(DddoptError):
    """A run configuration is internally inconsistent."""


class ConstantError(DddoptError):
    """A required problem constant is missing or non-positive."""


class RootError(DddoptError):
    """Closed-form and bisection roots of the step-size cubic disagree."""


class LengthMismatchError(DddoptError):
    """Per-seed sequences have different lengths."""


class DatasetMismatchError(DddoptError):
    """Two experiment specs do not share dataset and seeds."""
