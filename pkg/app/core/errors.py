"""
Exception hierarchy shared by the engines, the CLI and the HTTP layer.

Every error carries the process exit code the CLI uses for it:
1 semantic reject, 2 parse error, 3 input-validity error.
"""
from typing import Optional


class PrequantError(Exception):
    """Base class for all library errors"""
    exit_code: int = 3

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# Exit code 1: the input was understood and the answer is "no"

class RejectionError(PrequantError):
    exit_code = 1


class WeilRejection(RejectionError):
    """Some 2-cycle carries non-integral flux"""


class AtlasRejection(RejectionError):
    """The chart atlas violates compatibility or the cocycle condition"""


# Exit code 2: the input could not be read

class InputParseError(PrequantError):
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


# Exit code 3: the input was read but is not a valid instance

class InvalidComplexError(PrequantError):
    pass


class ConnectivityError(PrequantError):
    pass


class InvalidPathError(PrequantError):
    pass


class NotALoopError(PrequantError):
    pass


class CompositionError(PrequantError):
    pass


class DimensionMismatchError(PrequantError):
    pass


class ChartEscapeError(PrequantError):
    pass


class AtlasCoverageError(PrequantError):
    pass


class AtlasConsistencyError(PrequantError):
    pass


class CurvatureError(PrequantError):

    def __init__(self, message: str, face: int, curvature: float):
        super().__init__(message)
        self.face = face
        self.curvature = curvature


class NonExactFormError(PrequantError):
    pass


class PathBudgetError(PrequantError):

    def __init__(self, message: str, count: int):
        super().__init__(message)
        self.count = count


class TopologyError(PrequantError):
    pass


class OverlapError(PrequantError):
    pass


class InvalidParameterError(PrequantError):
    """Run parameter out of range (hbar, tolerances, step counts)"""


class OutputWriteError(PrequantError):
    """Report could not be written to the requested file"""
