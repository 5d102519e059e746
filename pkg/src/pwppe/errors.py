"""Exception hierarchy.

Every error carries the CLI exit code of its category so the command line
front end can map failures without inspecting messages.
"""


class PWPPEError(Exception):
    exit_code = 1


class ConfigError(PWPPEError, ValueError):
    """Invalid scene, training or experiment configuration."""

    exit_code = 2


class ShapeError(PWPPEError, ValueError):
    """Array dimensions or step counts do not agree."""

    exit_code = 3


class UnsupportedConfigurationError(ShapeError):
    pass


class ZeroModulationError(ShapeError):
    """An intensity vector has no modulation (max == min)."""


class EmptyDatasetError(ShapeError):
    pass


class EmptyInputError(ShapeError):
    pass


class DegenerateFitError(PWPPEError, ArithmeticError):
    exit_code = 4


class TrainingDivergedError(PWPPEError, ArithmeticError):
    exit_code = 4

    def __init__(self, iteration, value):
        super().__init__(f"training diverged at iteration {iteration} (mse={value})")
        self.iteration = iteration
        self.value = value


class FormatError(PWPPEError, OSError):
    """Malformed or incompatible file."""

    exit_code = 5

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IncompatibleVersionError(FormatError):
    pass
