"""Exception hierarchy for casimir_qi.

Every error raised on purpose by the library derives from CasimirQIError so the
CLI can map it to exit code 1 and a machine-readable error object.
"""
from typing import Any, Dict, Optional


class CasimirQIError(Exception):
    """Base class. `detail` is emitted verbatim in CLI error reports."""

    def __init__(self, message: str, **detail: Any):
        super().__init__(message)
        self.detail: Dict[str, Any] = detail

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": type(self).__name__,
            "message": str(self),
            "detail": self.detail,
        }


# numerics

class QuadratureFailure(CasimirQIError):
    def __init__(self, message: str, partial_value: float, error_estimate: float, **detail: Any):
        super().__init__(message, partial_value=partial_value, error_estimate=error_estimate, **detail)
        self.partial_value = partial_value
        self.error_estimate = error_estimate


class IntegrandSingularity(CasimirQIError):
    def __init__(self, location: float, value: float):
        super().__init__(f"integrand singularity at x={location!r} (f={value!r})",
                         location=location, value=value)
        self.location = location


class InsufficientAveragingWindow(CasimirQIError, ValueError):
    pass


class InvalidBracket(CasimirQIError, ValueError):
    pass


# modes

class InvalidFrequency(CasimirQIError, ValueError):
    pass


class BoxTooSmall(CasimirQIError, ValueError):
    pass


class EigenvalueSolveFailure(CasimirQIError):
    def __init__(self, parity: int, index: int, reason: Optional[str] = None):
        super().__init__(f"eigenvalue solve failure for (j={parity}, n={index})",
                         parity=parity, index=index, reason=reason)


class OutsideBox(CasimirQIError, ValueError):
    pass


# qi

class InvalidScale(CasimirQIError, ValueError):
    pass


class NegativeDensity(CasimirQIError, ValueError):
    pass


class DivergentBound(CasimirQIError):
    pass


# oracle

class SingularPoint(CasimirQIError, ValueError):
    pass


class SpectrumGap(CasimirQIError):
    pass


class NonInverseLBehavior(CasimirQIError):
    pass


# orchestration

class InvariantViolation(CasimirQIError):
    pass


class OutputError(CasimirQIError):
    pass
