from __future__ import annotations

from typing import Any, Dict, Optional

__all__ = [
    "FloquetLieError",
    "ContextError",
    "InvalidGroupElement",
    "DriftError",
    "BoundaryError",
    "UniformReducibilityViolated",
    "BranchAmbiguity",
    "FactorizationError",
    "HomotopyUnavailable",
    "ResolutionError",
    "OrbitDetectionError",
    "OracleUnavailable",
    "ConfigError",
]


class FloquetLieError(Exception):
    """Base class for every error raised by ``floquet_lie``.

    Subclasses set ``code`` and may add keyword details which end up in the
    machine-readable record written by the CLI.
    """

    code = "floquet_lie_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"error": self.code, "message": self.message}
        record.update({k: v for k, v in self.details.items() if v is not None})
        return record


class ContextError(FloquetLieError, ValueError):
    code = "context_mismatch"


class InvalidGroupElement(FloquetLieError, ValueError):
    code = "invalid_group_element"


class DriftError(FloquetLieError, RuntimeError):
    code = "drift_exceeded"

    def __init__(self, t: float, drift: float, tolerance: float, s: Optional[float] = None):
        where = f" (s={s:.6g})" if s is not None else ""
        super().__init__(
            f"Manifold drift {drift:.3e} exceeds tolerance {tolerance:.1e} at t={t:.6g}{where}; "
            "try a smaller step (larger N_t).",
            t=t,
            drift=drift,
            tolerance=tolerance,
            s=s,
        )
        self.t = t
        self.drift = drift
        self.tolerance = tolerance
        self.s = s

    def tagged(self, s: float) -> "DriftError":
        return DriftError(self.t, self.drift, self.tolerance, s=s)


class BoundaryError(FloquetLieError, IndexError):
    code = "boundary_stencil"


class UniformReducibilityViolated(FloquetLieError, RuntimeError):
    code = "uniform_reducibility_violated"

    def __init__(self, s: float, trace: Optional[float] = None):
        super().__init__(f"Monodromy at s={s:.6g} is not in the image of exp", s=s, trace=trace)
        self.s = s


class BranchAmbiguity(FloquetLieError, RuntimeError):
    code = "branch_ambiguity"

    def __init__(self, s: float, jump: float, threshold: float):
        super().__init__(
            f"Log branch at s={s:.6g} is ambiguous or jumps by {jump:.3e} (threshold {threshold:.3e}); "
            "refine the s-grid.",
            s=s,
            jump=jump,
            threshold=threshold,
        )
        self.s = s


class FactorizationError(FloquetLieError, RuntimeError):
    code = "factorization_failed"

    def __init__(self, s: float, residual: float, tolerance: float):
        super().__init__(
            f"Floquet factor is not periodic at s={s:.6g}: residual {residual:.3e} > {tolerance:.1e}",
            s=s,
            residual=residual,
            tolerance=tolerance,
        )
        self.s = s


class HomotopyUnavailable(FloquetLieError, RuntimeError):
    code = "homotopy_unavailable"


class ResolutionError(FloquetLieError, ValueError):
    code = "resolution_too_coarse"


class OrbitDetectionError(FloquetLieError, RuntimeError):
    code = "orbit_detection_failed"


class OracleUnavailable(FloquetLieError, RuntimeError):
    code = "oracle_unavailable"


class ConfigError(FloquetLieError, ValueError):
    code = "config_error"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field
