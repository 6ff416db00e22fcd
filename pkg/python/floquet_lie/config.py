from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

__all__ = [
    "GroupId",
    "HomotopyKind",
    "Tolerances",
    "GridSpec",
    "FourierSpec",
    "SegmentSpec",
    "PiecewiseSpec",
    "CurveSpec",
    "RigidBodySpec",
    "OutputSpec",
    "AnalysisConfig",
    "DEFAULT_TOLERANCES",
    "THREADS_ENV",
    "load_config",
    "parse_config",
    "apply_overrides",
    "resolve_threads",
]

GroupId = Literal["SO3", "SL2R"]
HomotopyKind = Literal["linear", "geodesic"]

THREADS_ENV = "FLOQUET_LIE_THREADS"
TWO_PI = 2.0 * math.pi


class Tolerances(BaseModel):
    """Numerical tolerances shared by every pipeline stage."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    drift: float = 1e-9
    splitting: float = 1e-6
    branch_jump: float = 0.5
    periodicity: float = 1e-8
    log_window: float = 1e-4
    closure: float = 1e-8

    @field_validator("*")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not (value > 0 and math.isfinite(value)):
            raise ValueError("must be a positive finite number")
        return value


DEFAULT_TOLERANCES = Tolerances()


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    n_t: int = Field(256, alias="N_t")
    n_s: int = Field(64, alias="N_s")

    @field_validator("n_t", "n_s")
    @classmethod
    def _dyadic(cls, value: int) -> int:
        if value < 8 or not _is_power_of_two(value):
            raise ValueError(f"must be a power of two >= 8, got {value}")
        return value


class FourierSpec(BaseModel):
    """Per-coordinate ``[cos, sin]`` coefficient pairs starting at harmonic 0."""

    model_config = ConfigDict(extra="forbid")

    coefficients: List[List[Tuple[float, float]]]
    period: float = TWO_PI

    @field_validator("coefficients")
    @classmethod
    def _three_coordinates(cls, value: List[List[Tuple[float, float]]]) -> List[List[Tuple[float, float]]]:
        if len(value) != 3:
            raise ValueError(f"expected 3 coordinate series, got {len(value)}")
        if any(len(series) == 0 for series in value):
            raise ValueError("every coordinate needs at least the constant term")
        return value

    @field_validator("period")
    @classmethod
    def _positive_period(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("period must be positive")
        return value


class SegmentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_start: float
    t_end: float
    coords: Tuple[float, float, float]


class PiecewiseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    segments: List[SegmentSpec]
    period: float = TWO_PI

    @model_validator(mode="after")
    def _partition(self) -> "PiecewiseSpec":
        if not self.segments:
            raise ValueError("at least one segment is required")
        if self.segments[0].t_start != 0.0:
            raise ValueError("segments must start at t=0")
        for left, right in zip(self.segments, self.segments[1:]):
            if left.t_end != right.t_start:
                raise ValueError(f"gap or overlap between t={left.t_end} and t={right.t_start}")
        for seg in self.segments:
            if seg.t_end <= seg.t_start:
                raise ValueError(f"empty segment [{seg.t_start}, {seg.t_end})")
        if not math.isclose(self.segments[-1].t_end, self.period, rel_tol=0, abs_tol=1e-12):
            raise ValueError("segments must end at the period")
        return self


class CurveSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fourier: Optional[FourierSpec] = None
    piecewise: Optional[PiecewiseSpec] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "CurveSpec":
        if (self.fourier is None) == (self.piecewise is None):
            raise ValueError("exactly one of 'fourier' or 'piecewise' must be given")
        return self


class RigidBodySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inertia: Tuple[float, float, float]
    radius: float = 1.0
    theta_max: float = 0.5

    @field_validator("inertia")
    @classmethod
    def _positive_moments(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(v <= 0 for v in value):
            raise ValueError("principal moments must be positive")
        return value

    @field_validator("radius")
    @classmethod
    def _positive_radius(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("orbit radius must be positive")
        return value

    @field_validator("theta_max")
    @classmethod
    def _polar_range(cls, value: float) -> float:
        if not 0 < value < math.pi / 2:
            raise ValueError("theta_max must lie in (0, pi/2)")
        return value


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = "out"


class AnalysisConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    group: GroupId = "SO3"
    curve: Optional[CurveSpec] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    homotopy: HomotopyKind = "linear"
    rigid_body: Optional[RigidBodySpec] = None
    output: OutputSpec = Field(default_factory=OutputSpec)

    def echo(self) -> Dict[str, Any]:
        """JSON-ready dump that re-parses to an equal config."""
        return self.model_dump(mode="json", by_alias=True)


def _field_path(loc: Iterable[Any]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(data: Dict[str, Any]) -> AnalysisConfig:
    try:
        return AnalysisConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(_field_path(first["loc"]), first["msg"]) from exc


def load_config(path: str | Path, encoding: str | None = "utf-8") -> AnalysisConfig:
    """Read and validate a JSON analysis config.

    Raises:
        ConfigError: When the file is missing, is not JSON, or fails validation.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("<file>", f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding=encoding))
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return parse_config(data)


def apply_overrides(config: AnalysisConfig, overrides: Optional[List[str]]) -> AnalysisConfig:
    """Apply ``KEY=VAL`` tolerance overrides and return a new config."""
    if not overrides:
        return config
    values = config.tolerances.model_dump()
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"tolerances.{key}", "override must look like KEY=VAL")
        if key not in values:
            raise ConfigError(f"tolerances.{key}", "unknown tolerance")
        try:
            values[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"tolerances.{key}", f"not a number: {raw!r}") from exc
    try:
        tolerances = Tolerances(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(_field_path(("tolerances", *first["loc"])), first["msg"]) from exc
    return config.model_copy(update={"tolerances": tolerances})


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``FLOQUET_LIE_THREADS``, where 0 means all cores."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(THREADS_ENV, f"not an integer: {env!r}") from exc
        else:
            threads = 0
    if threads < 0:
        raise ConfigError("threads", "must be >= 0")
    if threads == 0:
        return os.cpu_count() or 1
    return threads
