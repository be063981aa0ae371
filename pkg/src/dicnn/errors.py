"""Exception taxonomy shared by every module.

Each class carries a short machine-parsable ``category`` used by the CLI to
pick exit codes and to prefix error lines on stderr.
"""


class DicnnError(Exception):
    category = "error"


class ShapeError(DicnnError):
    """Array shapes or index bounds violate an operation's contract."""

    category = "shape"


class CsvParseError(DicnnError):
    """A cell could not be parsed; message carries row and column."""

    category = "parse"


class SchemaError(DicnnError):
    """Input file structure is wrong (missing columns, bad checkpoint)."""

    category = "schema"


class ConfigError(DicnnError):
    """Invalid or inconsistent configuration values."""

    category = "config"


class DataError(DicnnError):
    """Dataset content cannot support the requested operation."""

    category = "data"


class StateError(DicnnError):
    """Operation called on an object in the wrong lifecycle state."""

    category = "state"


class NumericError(DicnnError):
    """Non-finite values where finite ones are required."""

    category = "numeric"


class CompatibilityError(DicnnError):
    """Artifacts do not fit together (architecture / mask / width)."""

    category = "compat"
