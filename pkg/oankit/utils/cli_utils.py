import logging
import sys

from oankit.utils.errors import CalibrationError
from oankit.utils.errors import ConfigError
from oankit.utils.errors import NumericError

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4
EXIT_CALIBRATION = 5


def get_commandline_args():
    extra_chars = [
        " ",
        ";",
        "&",
        "(",
        ")",
        "|",
        "^",
        "<",
        ">",
        "?",
        "*",
        "[",
        "]",
        "$",
        "`",
        '"',
        "\\",
        "!",
        "{",
        "}",
    ]

    # Escape the extra characters for shell
    argv = [
        arg.replace("'", "'\\''")
        if all(char not in arg for char in extra_chars)
        else "'" + arg.replace("'", "'\\''") + "'"
        for arg in sys.argv
    ]

    return sys.executable + " " + " ".join(argv)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception raised by a command to the process exit code.

    Examples:
        >>> exit_code_for(FileNotFoundError("x"))
        2
        >>> exit_code_for(ConfigError(["a: unknown key"]))
        3
        >>> exit_code_for(CalibrationError("no statistics"))
        5
    """
    # ConfigError and CalibrationError are ValueErrors, NumericError an
    # ArithmeticError: check them before the generic OSError branch.
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, CalibrationError):
        return EXIT_CALIBRATION
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def run_with_exit_code(func, *args, **kwargs) -> int:
    """Call ``func`` and translate known failures into exit codes."""
    try:
        func(*args, **kwargs)
    except (ConfigError, NumericError, OSError, CalibrationError) as e:
        logging.error(str(e))
        return exit_code_for(e)
    return EXIT_OK
