"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for configuration problems, 3 for bad input data, 4 for numerical failures.
"""


class RegimeTaaError(Exception):
    exit_code = 1
    code = "ERROR"


class ConfigError(RegimeTaaError, ValueError):
    exit_code = 2
    code = "CONFIG_ERROR"


class DataError(RegimeTaaError, ValueError):
    exit_code = 3
    code = "DATA_ERROR"


class ParseError(DataError):
    code = "PARSE_ERROR"


class ValidationError(DataError):
    code = "VALIDATION_ERROR"


class DomainError(DataError):
    code = "DOMAIN_ERROR"


class LengthError(DataError):
    code = "LENGTH_ERROR"


class ShapeError(DataError):
    code = "SHAPE_ERROR"


class DegenerateColumnError(DataError):
    code = "DEGENERATE_COLUMN"


class NumericalError(RegimeTaaError, ArithmeticError):
    exit_code = 4
    code = "NUMERICAL_ERROR"


class DegenerateError(NumericalError):
    code = "DEGENERATE"


class SingularSystemError(NumericalError):
    code = "SINGULAR_SYSTEM"


class FlatPositionWarning(UserWarning):
    """Emitted when a sizing scheme cannot take any position and stays in cash."""
