import math

import numpy as np
import pytest
from scipy.linalg import expm

from floquet_lie import (
    AlgebraElement,
    BoundaryError,
    DriftError,
    GroupElement,
    LinearHomotopy,
    PeriodicCurve,
    ResolutionError,
    SampledHomotopy,
    d_operator,
    d_operator_grid,
    evaluate_curve,
    get_context,
    grid_derivative,
    solve_family,
    solve_fundamental,
    step,
)
from floquet_lie.selftest import rotating_field

ROTATING_MONODROMY = 2 * math.pi * np.array([0.3, 0.0, -0.6])


def _monodromy_error(n_t):
    curve = rotating_field()
    exact = curve.context.exp(ROTATING_MONODROMY)
    return float(np.max(np.abs(solve_fundamental(curve, n_t).monodromy().matrix - exact)))


def test_fourier_curve_evaluation():
    curve = rotating_field(0.3, 0.4)
    t = 0.7
    np.testing.assert_allclose(curve(t), [0.3 * math.cos(t), 0.3 * math.sin(t), 0.4], atol=1e-15)
    np.testing.assert_allclose(evaluate_curve(curve, t + 2 * math.pi).coords, curve(t), atol=1e-14)


def test_piecewise_curve_evaluation():
    ctx = get_context("SO3")
    curve = PeriodicCurve.piecewise(ctx, [0.0, 1.0, 2.0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(curve(0.5), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(curve(1.5), [0.0, 1.0, 0.0])
    np.testing.assert_allclose(curve(2.5), [1.0, 0.0, 0.0])


def test_from_samples_reproduces_a_trigonometric_curve():
    curve = rotating_field()
    sampled = PeriodicCurve.from_samples(curve.context, curve.samples(32), curve.period)
    t = np.linspace(0.0, 2 * math.pi, 17)
    np.testing.assert_allclose(sampled(t), curve(t), atol=1e-14)


def test_zero_curve_gives_identity():
    solution = solve_fundamental(PeriodicCurve.zero(get_context("SO3")), 16)
    np.testing.assert_array_equal(solution.values, np.broadcast_to(np.eye(3), solution.values.shape))


@pytest.mark.parametrize("group", ["SO3", "SL2R"])
def test_constant_curve_is_exact(group):
    ctx = get_context(group)
    coords = [0.2, -0.1, 0.5]
    solution = solve_fundamental(PeriodicCurve.constant(ctx, coords), 64)
    np.testing.assert_allclose(solution.monodromy().matrix, expm(2 * math.pi * ctx.hat(coords)), atol=1e-12)


def test_rotating_field_monodromy_matches_closed_form():
    assert _monodromy_error(1024) <= 1e-8


def test_stepper_is_fourth_order():
    errors = [_monodromy_error(n) for n in (64, 128, 256)]
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert 3.8 <= orders[-1] <= 4.2


def test_drift_per_period_at_fine_step():
    solution = solve_fundamental(rotating_field(), 1024)
    assert solution.max_drift <= 1e-9


def test_flow_group_property_over_two_periods():
    solution = solve_fundamental(rotating_field(), 256, periods=2)
    m = solution.monodromy().matrix
    np.testing.assert_allclose(solution.values[256:], solution.values[:257] @ m, atol=1e-8)


def test_single_step_matches_solver():
    curve = rotating_field()
    solution = solve_fundamental(curve, 64)
    g = GroupElement.identity(curve.context)
    for j in range(3):
        g = step(g, curve, solution.times[j], solution.step)
    np.testing.assert_allclose(g.matrix, solution.values[3], atol=1e-14)


def test_piecewise_flow_is_an_exact_product():
    ctx = get_context("SL2R")
    a, b = np.array([0.0, 0.0, 2.0]), np.array([0.6, 0.0, 0.0])
    curve = PeriodicCurve.piecewise(ctx, [0.0, math.pi, 2 * math.pi], [a, b])
    m = solve_fundamental(curve, 16).monodromy().matrix
    expected = ctx.exp(math.pi * b) @ ctx.exp(math.pi * a)
    np.testing.assert_allclose(m, expected, atol=1e-13)


@pytest.mark.parametrize("n_t", [4, 7, 31])
def test_rejects_bad_grid(n_t):
    with pytest.raises(ValueError):
        solve_fundamental(rotating_field(), n_t)


def test_step_rejects_non_positive_size():
    curve = rotating_field()
    with pytest.raises(ValueError):
        step(GroupElement.identity(curve.context), curve, 0.0, 0.0)


def test_drift_error_reports_time():
    with pytest.raises(DriftError) as info:
        solve_fundamental(rotating_field(), 8, tolerance=1e-30)
    assert info.value.t > 0


def test_family_rows_match_independent_solves():
    curve = rotating_field()
    family = solve_family(LinearHomotopy(curve), 8, 64, threads=1)
    assert family.values.shape == (9, 65, 3, 3)
    for s, row in zip(family.s_grid, family.rows):
        np.testing.assert_array_equal(row.values, solve_fundamental(curve.scaled(s), 64).values)


def test_family_is_independent_of_thread_count():
    curve = rotating_field()
    serial = solve_family(LinearHomotopy(curve), 8, 64, threads=1)
    pooled = solve_family(LinearHomotopy(curve), 8, 64, threads=4)
    np.testing.assert_array_equal(serial.values, pooled.values)


def test_family_drift_is_tagged_with_s():
    with pytest.raises(DriftError) as info:
        solve_family(LinearHomotopy(rotating_field()), 8, 8, tolerance=1e-30)
    assert info.value.s is not None


def test_sampled_homotopy_requires_its_own_grid():
    ctx = get_context("SO3")
    curves = [PeriodicCurve.zero(ctx) for _ in range(9)]
    homotopy = SampledHomotopy(ctx, np.linspace(0.0, 1.0, 9), curves)
    assert len(homotopy.s_grid(8)) == 9
    with pytest.raises(ResolutionError):
        homotopy.s_grid(16)


def test_grid_derivative_is_fourth_order():
    def error(n):
        t = np.linspace(0.0, 1.0, n + 1)
        return np.max(np.abs(grid_derivative(np.sin(3 * t), 1.0 / n) - 3 * np.cos(3 * t)))

    assert math.log2(error(32) / error(64)) > 3.5


def test_periodic_derivative():
    n = 64
    t = np.arange(n) * (2 * math.pi / n)
    derivative = grid_derivative(np.sin(t), 2 * math.pi / n, mode="periodic")
    np.testing.assert_allclose(derivative, np.cos(t), atol=1e-5)


def test_grid_derivative_needs_five_samples():
    with pytest.raises(ResolutionError):
        grid_derivative(np.zeros(4), 0.1)


def test_d_of_exponential_line():
    ctx = get_context("SO3")
    a = np.array([0.3, -0.5, 0.8])
    n = 1024
    h = 2 * math.pi / n
    samples = ctx.exp(np.arange(n + 1)[:, None] * h * a)
    np.testing.assert_allclose(d_operator_grid(ctx, samples, h), np.broadcast_to(a, (n + 1, 3)), atol=1e-8)
    np.testing.assert_allclose(d_operator(ctx, samples, 10, h).coords, a, atol=1e-9)


def test_d_of_constant_is_zero():
    ctx = get_context("SL2R")
    samples = np.broadcast_to(ctx.exp(np.array([0.4, 0.1, 0.2])), (16, 2, 2))
    assert d_operator(ctx, samples, 5, 0.1).norm() < 1e-14


def test_d_recovers_the_curve_on_a_solution():
    curve = rotating_field()
    solution = solve_fundamental(curve, 1024)
    d = d_operator_grid(curve.context, solution.values, solution.step)
    np.testing.assert_allclose(d, curve(solution.times), atol=1e-8)


def test_d_operator_boundary():
    ctx = get_context("SO3")
    samples = ctx.exp(np.linspace(0.0, 1.0, 16)[:, None] * np.array([0.0, 0.0, 1.0]))
    with pytest.raises(BoundaryError):
        d_operator(ctx, samples, 1, 1.0 / 15)
    assert isinstance(d_operator(ctx, samples[:-1], 0, 1.0 / 15, periodic=True), AlgebraElement)
