"""Exception types shared across oankit.

The command line entry maps these to exit codes (see ``oankit.bin.oan_main``).
"""

from typing import Sequence


class ShapeError(ValueError):
    """Tensor or grid geometry does not fit the operator."""


class NumericError(ArithmeticError):
    """A value became non-finite or left its admissible range."""


class CalibrationError(ValueError):
    """Threshold calibration was requested without recorded statistics."""


class FileFormatError(OSError):
    """A file exists but its content is not in the expected format."""


class ConfigError(ValueError):
    """Run configuration failed validation.

    Examples:
        >>> e = ConfigError(["tiling.stride: must be positive"])
        >>> e.violations
        ['tiling.stride: must be positive']
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__(
            "invalid configuration:\n" + "\n".join(f"  {v}" for v in self.violations)
        )
