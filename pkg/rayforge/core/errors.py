"""
Exception hierarchy shared by every rayforge component.

Each error carries a machine-readable ``code`` and the process ``exit_code``
the CLI uses: 1 tolerance breach, 2 input error, 3 trapped ray or failed
scene validation.
"""

from typing import Optional


class RayforgeError(ValueError):
    """Base class for all rayforge errors."""

    code = "rayforge-error"
    exit_code = 2

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def describe(self) -> str:
        """Return ``[code] message`` for console output."""
        return f"[{self.code}] {self}"


class SceneSyntaxError(RayforgeError):
    """Malformed scene file."""

    code = "scene-syntax"

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SceneValidationError(RayforgeError):
    """Scene parsed but violates a geometric or range requirement."""

    code = "scene-invalid"
    exit_code = 3


class PointOutsideDomainError(RayforgeError):
    code = "point-outside-domain"


class NonTangentVectorError(RayforgeError):
    code = "non-tangent-vector"


class NonUnitVectorError(RayforgeError):
    code = "non-unit-vector"


class TrappedRayError(RayforgeError):
    """A magnetic geodesic did not leave the domain before ``s_max``."""

    code = "trapped-ray"
    exit_code = 3

    def __init__(self, message: str, count: int = 1):
        super().__init__(message)
        self.count = count


class StepUnderflowError(RayforgeError):
    code = "step-underflow"
    exit_code = 3


class ParameterOutOfIntervalError(RayforgeError):
    code = "parameter-out-of-interval"


class DimensionMismatchError(RayforgeError):
    code = "dimension-mismatch"


class StepGridMismatchError(RayforgeError):
    code = "step-grid-mismatch"


class QuadratureStepError(RayforgeError):
    code = "quadrature-step"


class SupportError(RayforgeError):
    """Potential support reaches too close to the boundary."""

    code = "support"


class CacheMismatchError(RayforgeError):
    """Data was produced for a different scene or ray geometry."""

    code = "cache-mismatch"


class ConformalFactorError(RayforgeError):
    code = "conformal-factor"


class FileFormatError(RayforgeError):
    code = "file-format"


class ToleranceBreachError(RayforgeError):
    """A verification quantity exceeded its tolerance."""

    code = "tolerance-breach"
    exit_code = 1
