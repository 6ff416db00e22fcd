from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ._version import __version__
from .config import AnalysisConfig, ConfigError, apply_overrides, load_config
from .errors import FloquetLieError
from .euler_apps import (
    RigidBodyFamily,
    reconstruction_phases,
    rigid_body_family,
    spherical_area_oracle,
)
from .floquet import classify_monodromy, monodromy
from .integrator import PeriodicCurve
from .lie_core import GroupElement, get_context
from .phases import SWEEP_COLUMNS, PhaseReport, split_phases

__all__ = [
    "Provenance",
    "ReportDocument",
    "ORBIT_COLUMNS",
    "BOUNDARY_COLUMNS",
    "analyze",
    "analyze_rigid_body",
    "run_analyze",
    "run_sweep",
    "run_rigidbody",
    "write_error",
    "format_csv",
]

logger = logging.getLogger(__name__)

ORBIT_COLUMNS = ("s", "t", "xi_1", "xi_2", "xi_3")
BOUNDARY_COLUMNS = ("t", "xi_1", "xi_2", "xi_3")

# rigid-body agreement levels reported as pass/fail flags
_RECONSTRUCTION_TOLERANCE = 1e-8
_ORACLE_TOLERANCE = 1e-6


class Provenance(BaseModel):
    version: str = __version__
    group: str
    grid: Dict[str, int]
    branch_rule: str
    homotopy: str
    parameterization: Optional[str] = None


def _non_finite(value: Any, path: str = "") -> Optional[str]:
    if isinstance(value, float) and not math.isfinite(value):
        return path or "<root>"
    if isinstance(value, dict):
        for key, item in value.items():
            found = _non_finite(item, f"{path}.{key}" if path else str(key))
            if found:
                return found
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            found = _non_finite(item, f"{path}[{i}]")
            if found:
                return found
    return None


class ReportDocument(BaseModel):
    """Everything a run produced, in a JSON-ready shape."""

    config: Dict[str, Any]
    monodromy: Dict[str, Any]
    phases: Dict[str, Any]
    sweep: List[Dict[str, float]] = Field(default_factory=list)
    reconstruction: Optional[List[Dict[str, Any]]] = None
    checks: Dict[str, bool] = Field(default_factory=dict)
    provenance: Provenance

    @model_validator(mode="after")
    def _finite(self) -> "ReportDocument":
        found = _non_finite(self.model_dump(exclude={"config"}))
        if found:
            raise ValueError(f"non-finite value at {found}")
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2) + "\n"

    def echoed_config(self) -> AnalysisConfig:
        return AnalysisConfig.model_validate(self.config)


def format_csv(columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Fixed-header CSV with every value in round-trip ``.17g`` form."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format(float(v), ".17g") for v in row])
    return buffer.getvalue()


def _write(out_dir: Path, name: str, contents: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(contents, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def write_error(out_dir: str | Path, exc: FloquetLieError) -> Path:
    """Machine-readable ``error.json`` next to where the report would have gone."""
    return _write(Path(out_dir), "error.json", json.dumps(_jsonable(exc.to_record()), indent=2) + "\n")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _prepare(config_path: str | Path, overrides: Optional[List[str]]) -> AnalysisConfig:
    return apply_overrides(load_config(config_path), overrides)


def _curve(config: AnalysisConfig) -> PeriodicCurve:
    if config.curve is None:
        raise ConfigError("curve", "a curve is required for this command")
    return PeriodicCurve.from_config(get_context(config.group), config.curve)


def analyze(config: AnalysisConfig, threads: int = 1) -> ReportDocument:
    """Monodromy classification followed by the full phase pipeline.

    Raises:
        FloquetLieError: Any pipeline failure; its details carry the monodromy record when
            the monodromy itself could be computed.
    """
    curve = _curve(config)
    mono = monodromy(curve, n_t=config.grid.n_t, tolerances=config.tolerances)
    try:
        report = split_phases(curve, config.grid, config.tolerances, homotopy=config.homotopy, threads=threads)
    except FloquetLieError as exc:
        exc.details.setdefault("monodromy", mono.to_record())
        raise
    return _document(config, mono.to_record(), report)


def _document(
    config: AnalysisConfig,
    mono_record: Dict[str, Any],
    report: PhaseReport,
    reconstruction: Optional[List[Dict[str, Any]]] = None,
    checks: Optional[Dict[str, bool]] = None,
    parameterization: Optional[str] = None,
) -> ReportDocument:
    checks = dict(checks or {})
    checks["splitting_within_tolerance"] = report.splitting_residual <= config.tolerances.splitting
    return ReportDocument(
        config=config.echo(),
        monodromy=mono_record,
        phases=report.to_record(),
        sweep=report.sweep_rows(),
        reconstruction=reconstruction,
        checks=checks,
        provenance=Provenance(
            group=config.group,
            grid={"N_t": report.n_t, "N_s": len(report.s_grid) - 1},
            branch_rule=report.k_rule,
            homotopy=report.homotopy_kind,
            parameterization=parameterization,
        ),
    )


def run_analyze(
    config_path: str | Path,
    out_dir: Optional[str | Path] = None,
    threads: int = 1,
    overrides: Optional[List[str]] = None,
) -> ReportDocument:
    config = _prepare(config_path, overrides)
    document = analyze(config, threads)
    _write(Path(out_dir or config.output.directory), "report.json", document.to_json())
    return document


def run_sweep(
    config_path: str | Path,
    out_dir: Optional[str | Path] = None,
    threads: int = 1,
    overrides: Optional[List[str]] = None,
) -> Path:
    """Write ``sweep.csv`` with one row per s-node in :data:`SWEEP_COLUMNS` order."""
    config = _prepare(config_path, overrides)
    report = split_phases(_curve(config), config.grid, config.tolerances, homotopy=config.homotopy, threads=threads)
    rows = [[row[c] for c in SWEEP_COLUMNS] for row in report.sweep_rows()]
    return _write(Path(out_dir or config.output.directory), "sweep.csv", format_csv(SWEEP_COLUMNS, rows))


def _degenerate_document(config: AnalysisConfig, family: RigidBodyFamily) -> ReportDocument:
    ctx = family.context
    records = [reconstruction_phases(family, i, config.tolerances) for i in range(len(family.s_grid))]
    final = records[-1]
    mono = classify_monodromy(GroupElement(ctx, ctx.exp(final.k)), config.tolerances)
    zeros = np.zeros(len(records))
    report = PhaseReport(
        context=ctx,
        homotopy_kind="rigid_body",
        k_rule="relative equilibrium: k = T dh/dxi",
        s_grid=family.s_grid,
        periods=family.periods,
        k=np.stack([r.k for r in records]),
        k_dyn=np.stack([r.k_dyn for r in records]),
        k_geom=np.stack([r.k_geom for r in records]),
        splitting_residuals=zeros,
        periodicity_residuals=zeros,
        row_drift=zeros,
        curvature_residual=0.0,
        surface_check=[0.0] * ctx.dim,
        monodromy=mono,
        n_t=family.n_t,
    )
    rows = [{**r.to_record(), "oracle": 0.0} for r in records]
    checks = {"degenerate": True, "rec1_equals_rec3": all(r.checks()["rec1_equals_rec3"] for r in records)}
    return _document(config, mono.to_record(), report, rows, checks, _PARAMETERIZATION)


_PARAMETERIZATION = "polar angle s * theta_max from the largest-moment axis, toward the next axis"


def analyze_rigid_body(config: AnalysisConfig, threads: int = 1) -> tuple[ReportDocument, RigidBodyFamily]:
    """Reconstruction phases along the rigid-body family described by ``config.rigid_body``."""
    spec = config.rigid_body
    if spec is None:
        raise ConfigError("rigid_body", "a rigid_body block is required for this command")
    if config.group != "SO3":
        raise ConfigError("group", "the rigid body lives on SO3")
    family = rigid_body_family(
        spec.inertia,
        orbit_radius=spec.radius,
        n_s=config.grid.n_s,
        theta_max=spec.theta_max,
        n_t=config.grid.n_t,
        tolerances=config.tolerances,
    )
    if family.degenerate:
        return _degenerate_document(config, family), family

    report = family.phase_report(config.tolerances, threads)
    records = []
    checks = {"rec1_equals_rec3": True, "dynamic_equals_rec3": True, "geometric_equals_rec2": True}
    checks.update({"monodromy_isotropy": True, "geometric_equals_oracle": True})
    for i in range(len(family.s_grid)):
        record = reconstruction_phases(family, i, config.tolerances, threads)
        oracle = spherical_area_oracle(family, i)
        row = record.to_record()
        row["oracle"] = oracle
        records.append(row)
        for name, ok in record.checks(_RECONSTRUCTION_TOLERANCE).items():
            checks[name] = checks[name] and ok
        checks["geometric_equals_oracle"] &= abs(record.geometric_pairing - oracle) <= _ORACLE_TOLERANCE
    mono = report.monodromy.to_record()
    return _document(config, mono, report, records, checks, _PARAMETERIZATION), family


def run_rigidbody(
    config_path: str | Path,
    out_dir: Optional[str | Path] = None,
    threads: int = 1,
    overrides: Optional[List[str]] = None,
) -> ReportDocument:
    """Write ``report.json``, ``orbits.csv`` (every orbit) and ``boundary.csv`` (the outermost orbit)."""
    config = _prepare(config_path, overrides)
    document, family = analyze_rigid_body(config, threads)
    target = Path(out_dir or config.output.directory)
    _write(target, "report.json", document.to_json())
    orbit_rows = [[orbit.s, t, *xi] for orbit in family.orbits for t, xi in zip(orbit.times, orbit.points)]
    _write(target, "orbits.csv", format_csv(ORBIT_COLUMNS, orbit_rows))
    outer = family.orbits[-1]
    _write(target, "boundary.csv", format_csv(BOUNDARY_COLUMNS, [[t, *xi] for t, xi in zip(outer.times, outer.points)]))
    return document
