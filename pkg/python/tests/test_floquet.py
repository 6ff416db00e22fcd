import math

import numpy as np
import pytest

from floquet_lie import (
    BranchAmbiguity,
    FactorizationError,
    GroupElement,
    LinearHomotopy,
    LogStatus,
    PeriodicCurve,
    UniformReducibilityViolated,
    analytic_dt_p,
    classify_monodromy,
    coadjoint_monodromy_residual,
    continue_log_branch,
    floquet_factor,
    get_context,
    monodromy,
    solve_family,
    solve_fundamental,
)
from floquet_lie.selftest import rotating_field


def _not_in_image_curve(b=0.3):
    """Half a turn then a hyperbolic push: ``m = -diag(e^{pi b}, e^{-pi b})``."""
    ctx = get_context("SL2R")
    return PeriodicCurve.piecewise(ctx, [0.0, math.pi, 2 * math.pi], [[0.0, 0.0, 2.0], [2 * b, 0.0, 0.0]])


def test_rotating_field_monodromy_report():
    report = monodromy(rotating_field(), n_t=1024)
    assert report.reducible and report.adjoint_reducible
    exact = get_context("SO3").exp(2 * math.pi * np.array([0.3, 0.0, -0.6]))
    np.testing.assert_allclose(report.monodromy.matrix, exact, atol=1e-8)
    record = report.to_record()
    assert record["status"] == report.status.value
    assert len(record["principal_log"]) == 3


def test_monodromy_accepts_a_solution():
    solution = solve_fundamental(rotating_field(), 128)
    report = monodromy(solution)
    np.testing.assert_array_equal(report.monodromy.matrix, solution.values[128])
    assert report.max_drift == solution.max_drift


def test_sl2r_not_in_image_but_adjoint_reducible():
    b = 0.3
    report = monodromy(_not_in_image_curve(b), n_t=16)
    assert report.status == LogStatus.NOT_IN_IMAGE
    assert np.trace(report.monodromy.matrix) < -2
    assert not report.reducible
    assert report.adjoint_reducible
    np.testing.assert_allclose(report.adjoint_log_coords, [2 * math.pi * b, 0.0, 0.0], atol=1e-12)
    assert "center_factor" in report.to_record()


def test_sl2r_elliptic_monodromy_is_reducible():
    ctx = get_context("SL2R")
    report = monodromy(PeriodicCurve.constant(ctx, [0.2, 0.1, 0.8]), n_t=64)
    assert report.reducible
    assert report.status == LogStatus.BRANCH_FAMILY
    np.testing.assert_allclose(report.log.principal.coords, 2 * math.pi * np.array([0.2, 0.1, 0.8]), atol=1e-10)


def test_coadjoint_period_map_matches_the_log():
    report = monodromy(rotating_field(), n_t=256)
    assert coadjoint_monodromy_residual(report.monodromy, report.log.principal.coords) < 1e-12


def test_continuation_follows_a_rotation_past_pi():
    ctx = get_context("SO3")
    axis = np.array([0.0, 0.6, 0.8])
    s_grid = np.linspace(0.0, 1.0, 33)
    angles = 5.0 * s_grid
    ms = [GroupElement(ctx, ctx.exp(a * axis)) for a in angles]
    branch = continue_log_branch(ms, s_grid)
    np.testing.assert_allclose(branch.k, angles[:, None] * axis, atol=1e-9)
    assert branch.jumps.max() < 0.5


def test_continuation_through_a_full_turn():
    ctx = get_context("SO3")
    axis = np.array([1.0, 0.0, 0.0])
    s_grid = np.linspace(0.0, 1.0, 65)
    angles = 8.0 * s_grid
    ms = [GroupElement(ctx, ctx.exp(a * axis)) for a in angles]
    branch = continue_log_branch(ms, s_grid)
    np.testing.assert_allclose(branch.k[-1], [8.0, 0.0, 0.0], atol=1e-8)


def test_continuation_rejects_coarse_grids():
    ctx = get_context("SO3")
    s_grid = np.array([0.0, 1.0])
    ms = [GroupElement.identity(ctx), GroupElement(ctx, ctx.exp(np.array([0.0, 0.0, 2.0])))]
    with pytest.raises(BranchAmbiguity):
        continue_log_branch(ms, s_grid)


def test_continuation_stops_outside_the_image():
    ctx = get_context("SL2R")
    bad = GroupElement(ctx, -np.diag([2.0, 0.5]))
    with pytest.raises(UniformReducibilityViolated) as info:
        continue_log_branch([GroupElement.identity(ctx), bad], [0.0, 1.0])
    assert info.value.s == 1.0


def test_floquet_factor_is_periodic_and_rebuilds_the_solution():
    curve = rotating_field()
    family = solve_family(LinearHomotopy(curve), 16, 256)
    branch = continue_log_branch(family.monodromies(), family.s_grid)
    factor = floquet_factor(family, branch.k)
    assert factor.periodicity_residual <= 1e-8
    eye = np.eye(3)
    np.testing.assert_allclose(factor.p[:, 0], np.broadcast_to(eye, factor.p[:, 0].shape), atol=1e-15)
    np.testing.assert_allclose(factor.p[0], np.broadcast_to(eye, factor.p[0].shape), atol=1e-15)
    np.testing.assert_allclose(factor.reconstruct(10), family.values[10], atol=1e-12)


def test_floquet_factor_refuses_a_wrong_branch():
    curve = rotating_field()
    family = solve_family(LinearHomotopy(curve), 8, 64)
    k = np.zeros((9, 3))
    with pytest.raises(FactorizationError):
        floquet_factor(family, k)


def test_analytic_dt_p_matches_finite_differences():
    curve = rotating_field()
    homotopy = LinearHomotopy(curve)
    family = solve_family(homotopy, 8, 1024)
    branch = continue_log_branch(family.monodromies(), family.s_grid)
    factor = floquet_factor(family, branch.k)
    ctx = curve.context
    s_idx, t_idx = 8, 300
    h = factor.periods[s_idx] / 1024
    p = factor.p[s_idx]
    derivative = (p[t_idx - 2] - 8 * p[t_idx - 1] + 8 * p[t_idx + 1] - p[t_idx + 2]) / (12 * h)
    numeric = ctx.vee(derivative @ ctx.inverse(p[t_idx]))
    np.testing.assert_allclose(analytic_dt_p(factor, homotopy, s_idx, t_idx).coords, numeric, atol=1e-8)


def test_classify_handles_so3_half_turn():
    ctx = get_context("SO3")
    report = classify_monodromy(GroupElement(ctx, np.diag([1.0, -1.0, -1.0])))
    assert report.status == LogStatus.BRANCH_FAMILY
    assert report.reducible
