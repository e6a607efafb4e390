"""
Exception hierarchy for the camera-height toolkit.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class CamHeightError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class ConfigError(CamHeightError, ValueError):
    """Invalid configuration or command-line usage."""

    exit_code = 1


class InvalidInputError(CamHeightError, ValueError):
    """An argument violates an operation's precondition."""


class BehindCameraError(InvalidInputError):
    """A point with z <= 0 cannot be projected."""


class ValidationError(CamHeightError, ValueError):
    """Parsed data is well-formed but out of range."""


class ParseError(CamHeightError, ValueError):
    """A file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        location = ""
        if path:
            location += f"{path}:"
        if line is not None:
            location += f"line {line}: "
        elif location:
            location += " "
        super().__init__(f"{location}{message}")


class FrameUnusableError(CamHeightError):
    """A frame cannot contribute (empty road region, no valid normals...)."""


class DegenerateGeometryError(FrameUnusableError):
    """Geometry collapsed (zero-length normal, object on the horizon...)."""


class HorizonAtInfinityError(DegenerateGeometryError):
    """The road normal is parallel to the optical axis."""


class NoScaleError(FrameUnusableError):
    """No inlier object produced a scale factor for the frame."""


class MissingPriorError(CamHeightError, LookupError):
    """No height prior exists for an object instance."""


class UndefinedLossError(CamHeightError):
    """A loss term has no pixels to average over."""


class EpochSkippedError(CamHeightError):
    """No frame of the sequence produced a scaled camera height this epoch."""


class NumericalError(CamHeightError, ArithmeticError):
    """NaN or otherwise non-finite values reached a reduction."""

    exit_code = 3


class DivergenceError(NumericalError):
    """Iterative refinement stopped decreasing the loss."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PipelineError(CamHeightError):
    """The pipeline could not produce any result."""
