class GazeAuthError(Exception):
    """Base of every error the CLI maps to a non-zero exit code."""
    exit_code: int = 1


class ConfigError(GazeAuthError, ValueError):
    exit_code = 1


class DataError(GazeAuthError, ValueError):
    exit_code = 2


class NumericalError(GazeAuthError, ArithmeticError):
    exit_code = 3
