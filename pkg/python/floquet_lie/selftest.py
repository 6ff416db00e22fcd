"""Invariant suite behind ``floquet-lie selftest``.

Every check is deterministic: random elements come from a fixed-seed generator, grids are
fixed, and the printed table does not depend on the thread count.
"""

from __future__ import annotations

import contextlib
import logging
import math
import sys
from dataclasses import dataclass
from typing import Callable, Iterator, List, TextIO

import numpy as np

from . import lie_core
from .config import GridSpec
from .floquet import classify_monodromy, coadjoint_monodromy_residual, monodromy
from .integrator import PeriodicCurve, d_operator_grid, grid_derivative, solve_fundamental
from .lie_core import (
    AlgebraElement,
    CoalgebraElement,
    GroupElement,
    LogStatus,
    ad_star,
    adjoint,
    bracket,
    coadjoint,
    exp_group,
    get_context,
    kirillov,
    log_group,
    pairing,
)
from .phases import split_phases

__all__ = ["CheckResult", "run_selftest", "rotating_field", "flipped_ad_star"]

logger = logging.getLogger(__name__)

SEED = 20240117
GROUPS = ("SO3", "SL2R")


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    threshold: float
    passed: bool

    def line(self) -> str:
        return f"{self.name:<34} {self.residual:>12.3e} {self.threshold:>10.1e}  {'PASS' if self.passed else 'FAIL'}"


def _result(name: str, residual: float, threshold: float) -> CheckResult:
    residual = float(residual)
    return CheckResult(name, residual, threshold, bool(residual <= threshold))


def rotating_field(epsilon: float = 0.3, c: float = 0.4) -> PeriodicCurve:
    """``w(t) = (eps cos t, eps sin t, c)`` on so(3); its monodromy is ``exp(2 pi (eps, 0, c - 1))``."""
    coefficients = np.zeros((3, 2, 2))
    coefficients[0, 1, 0] = epsilon
    coefficients[1, 1, 1] = epsilon
    coefficients[2, 0, 0] = c
    return PeriodicCurve.fourier(get_context("SO3"), coefficients)


@contextlib.contextmanager
def flipped_ad_star() -> Iterator[None]:
    """Temporarily negate ``ad_star``; the Kirillov check must then fail."""
    lie_core._ad_star_sign = -1.0
    try:
        yield
    finally:
        lie_core._ad_star_sign = 1.0


def _algebra_checks(rng: np.random.Generator) -> List[CheckResult]:
    results = []
    for group in GROUPS:
        ctx = get_context(group)
        x, y, z = (AlgebraElement(ctx, rng.normal(size=3)) for _ in range(3))
        eta = CoalgebraElement(ctx, rng.normal(size=3))
        antisymmetry = (bracket(x, y) + bracket(y, x)).norm()
        jacobi = (bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y))).norm()
        g = exp_group(x * 0.7)
        morphism = (adjoint(g, bracket(y, z)) - bracket(adjoint(g, y), adjoint(g, z))).norm()
        casimir = abs(coadjoint(g, eta).casimir() - eta.casimir())
        # ad*_x eta paired with y is the Kirillov form; swapping x and y flips its sign
        tangent = pairing(ad_star(x, eta), y)
        kirillov_form = abs(tangent - kirillov(eta, x, y)) + abs(tangent + pairing(ad_star(y, eta), x))
        results += [
            _result(f"{group} bracket antisymmetry", antisymmetry, 1e-12),
            _result(f"{group} jacobi identity", jacobi, 1e-12),
            _result(f"{group} Ad is a morphism", morphism, 1e-12),
            _result(f"{group} coadjoint casimir", casimir, 1e-12),
            _result(f"{group} kirillov antisymmetry", kirillov_form, 1e-12),
        ]
    return results


def _exp_log_checks(rng: np.random.Generator) -> List[CheckResult]:
    results = []
    for group in GROUPS:
        ctx = get_context(group)
        worst_trip = worst_manifold = 0.0
        for _ in range(16):
            direction = rng.normal(size=3)
            if group == "SL2R":
                # keep the elliptic part below pi so the principal log is the original element
                direction[2] = 0.0
            x = AlgebraElement(ctx, direction / np.linalg.norm(direction) * rng.uniform(0.05, 2.5))
            g = exp_group(x)
            worst_manifold = max(worst_manifold, g.residual())
            worst_trip = max(worst_trip, float(np.linalg.norm(log_group(g).principal.coords - x.coords)))
        results += [
            _result(f"{group} log(exp(x)) = x", worst_trip, 1e-10),
            _result(f"{group} exp on the manifold", worst_manifold, 1e-12),
        ]
    return results


def _d_identity_checks() -> List[CheckResult]:
    """Logarithmic-derivative identities sampled at ``h = 2 pi / 1024``."""
    ctx = get_context("SO3")
    n = 1024
    h = 2 * math.pi / n
    t = np.arange(n + 1) * h
    a = np.array([0.3, -0.5, 0.8])
    b = np.array([-0.6, 0.2, 0.4])
    alpha = ctx.exp(t[:, None] * a)
    beta = ctx.exp(np.sin(t)[:, None] * b)
    d_alpha = d_operator_grid(ctx, alpha, h)
    d_beta = d_operator_grid(ctx, beta, h)
    inverse = ctx.inverse(alpha)
    product = alpha @ beta

    exp_line = np.max(np.abs(d_alpha - a))
    inversion = np.max(np.abs(d_operator_grid(ctx, inverse, h) + ctx.adjoint_coords(inverse, d_alpha)))
    translation = np.max(np.abs(d_operator_grid(ctx, product, h) - d_alpha - ctx.adjoint_coords(alpha, d_beta)))
    ad_alpha = ctx.adjoint_matrix(product)
    d_product = d_operator_grid(ctx, product, h)
    compatibility = np.max(np.abs(grid_derivative(ad_alpha, h) - ctx.ad_matrix(d_product) @ ad_alpha))
    return [
        _result("D(exp ta) = a", exp_line, 1e-8),
        _result("D(a^-1) = -Ad_{a^-1} D a", inversion, 1e-8),
        _result("D(ab) = D a + Ad_a D b", translation, 1e-8),
        _result("d/dt Ad_a = ad_{D a} Ad_a", compatibility, 1e-8),
    ]


def _integrator_checks() -> List[CheckResult]:
    curve = rotating_field()
    ctx = curve.context
    exact = ctx.exp(2 * math.pi * np.array([0.3, 0.0, -0.6]))
    errors = [float(np.max(np.abs(solve_fundamental(curve, n).monodromy().matrix - exact))) for n in (128, 256)]
    order = math.log2(errors[0] / errors[1])
    fine = solve_fundamental(curve, 1024, periods=2)
    m = fine.values[1024]
    group_property = float(np.max(np.abs(fine.values[1024:] - fine.values[: 1025] @ m)))
    return [
        _result("rotating-field monodromy oracle", float(np.max(np.abs(fine.values[1024] - exact))), 1e-8),
        _result("stepper order deviation from 4", abs(order - 4.0), 0.2),
        _result("manifold drift per period", fine.max_drift, 1e-9),
        _result("f(t + T) = f(t) m", group_property, 1e-8),
    ]


def _sl2_checks() -> List[CheckResult]:
    ctx = get_context("SL2R")
    b = 0.3
    m = GroupElement(ctx, -np.diag([math.exp(math.pi * b), math.exp(-math.pi * b)]))
    report = classify_monodromy(m)
    not_in_image = 0.0 if report.status == LogStatus.NOT_IN_IMAGE and not report.reducible else 1.0
    adjoint_log = float(np.linalg.norm(report.adjoint_log_coords - [2 * math.pi * b, 0.0, 0.0]))
    elliptic = PeriodicCurve.constant(ctx, [0.2, 0.1, 0.8])
    elliptic_report = monodromy(elliptic, n_t=256)
    isotropy = coadjoint_monodromy_residual(elliptic_report.monodromy, elliptic_report.log.principal.coords)
    return [
        _result("SL2R tr m < -2 is not in image", not_in_image, 0.5),
        _result("SL2R adjoint log of -exp", adjoint_log, 1e-10),
        _result("SL2R coadjoint period map", isotropy, 1e-10),
    ]


def _pipeline_checks() -> List[CheckResult]:
    report = split_phases(rotating_field(), GridSpec(N_t=256, N_s=128))
    return [
        _result("splitting k = k_dyn + k_geom", report.splitting_residual, 1e-6),
        _result("periodicity of p", report.periodicity_residual, 1e-8),
        _result("geometric phase vs surface", max(report.surface_check), 1e-10),
        _result("zero curvature on p^-1", report.curvature_residual, 1e-5),
    ]


_SUITES: List[Callable[[np.random.Generator], List[CheckResult]]] = [
    _algebra_checks,
    _exp_log_checks,
    lambda _: _d_identity_checks(),
    lambda _: _integrator_checks(),
    lambda _: _sl2_checks(),
    lambda _: _pipeline_checks(),
]


def run_selftest(stream: TextIO | None = None, quick: bool = False) -> List[CheckResult]:
    """Run the invariant suite and print one line per check.

    Args:
        stream: Where the table goes; ``sys.stdout`` by default.
        quick: Skip the full phase pipeline run.

    Returns:
        All check results in a fixed order.
    """
    stream = stream or sys.stdout
    rng = np.random.default_rng(SEED)
    suites = _SUITES[:-1] if quick else _SUITES
    results: List[CheckResult] = []
    for suite in suites:
        results.extend(suite(rng))
    print(f"{'check':<34} {'residual':>12} {'threshold':>10}  status", file=stream)
    for result in results:
        print(result.line(), file=stream)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed", file=stream)
    if failed:
        logger.error("%d selftest check(s) failed", failed)
    return results
