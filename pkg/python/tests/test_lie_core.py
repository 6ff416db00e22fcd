import math

import numpy as np
import pytest
from scipy.linalg import expm

from floquet_lie import (
    AlgebraElement,
    CoalgebraElement,
    ContextError,
    GroupElement,
    InvalidGroupElement,
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

GROUPS = ["SO3", "SL2R"]


def _random(group, rng, scale=1.0):
    return AlgebraElement(get_context(group), scale * rng.normal(size=3))


@pytest.mark.parametrize("group", GROUPS)
def test_bracket_is_a_lie_bracket(group):
    rng = np.random.default_rng(1)
    x, y, z = (_random(group, rng) for _ in range(3))
    assert (bracket(x, y) + bracket(y, x)).norm() < 1e-14
    jacobi = bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y))
    assert jacobi.norm() < 1e-13


@pytest.mark.parametrize("group", GROUPS)
def test_bracket_matches_matrix_commutator(group):
    rng = np.random.default_rng(2)
    x, y = _random(group, rng), _random(group, rng)
    commutator = x.matrix @ y.matrix - y.matrix @ x.matrix
    np.testing.assert_allclose(bracket(x, y).matrix, commutator, atol=1e-14)


def test_so3_bracket_is_cross_product():
    ctx = get_context("SO3")
    x, y = np.array([1.0, 2.0, -0.5]), np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(bracket(AlgebraElement(ctx, x), AlgebraElement(ctx, y)).coords, np.cross(x, y))


def test_sl2r_bracket_uses_the_indefinite_metric():
    ctx = get_context("SL2R")
    x, y = np.array([1.0, 2.0, -0.5]), np.array([0.3, -1.0, 2.0])
    expected = np.diag([1.0, 1.0, -1.0]) @ np.cross(x, y)
    np.testing.assert_allclose(bracket(AlgebraElement(ctx, x), AlgebraElement(ctx, y)).coords, expected, atol=1e-14)


def test_sl2r_coordinates_of_a_matrix():
    ctx = get_context("SL2R")
    a1, a2, a3 = 0.7, -0.2, 1.1
    element = AlgebraElement.from_matrix(ctx, np.array([[a1, a2], [a3, -a1]]))
    np.testing.assert_allclose(element.coords, [2 * a1, -a2 - a3, a2 - a3], atol=1e-15)


@pytest.mark.parametrize(
    "group,coords",
    [
        ("SO3", [0.3, -1.2, 0.8]),
        ("SO3", [1e-7, 0.0, 2e-7]),
        ("SO3", [0.0, 0.0, 3.0]),
        ("SL2R", [0.9, 0.4, 0.1]),
        ("SL2R", [0.1, 0.2, 1.7]),
        ("SL2R", [1e-7, -2e-7, 1e-7]),
        ("SL2R", [0.5, 0.0, 0.5]),
    ],
)
def test_exp_matches_scipy(group, coords):
    ctx = get_context(group)
    x = AlgebraElement(ctx, coords)
    np.testing.assert_allclose(exp_group(x).matrix, expm(x.matrix), atol=1e-13)


def test_rodrigues_quarter_turn():
    ctx = get_context("SO3")
    g = exp_group(AlgebraElement(ctx, [0.0, 0.0, math.pi / 2]))
    np.testing.assert_allclose(g.matrix, [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], atol=1e-15)


@pytest.mark.parametrize("group", GROUPS)
def test_exp_stays_on_the_group(group):
    rng = np.random.default_rng(3)
    for _ in range(20):
        assert exp_group(_random(group, rng, 2.0)).residual() < 1e-12


@pytest.mark.parametrize(
    "group,coords",
    [
        ("SO3", [0.4, -0.3, 1.1]),
        ("SO3", [1e-6, 2e-6, -1e-6]),
        ("SL2R", [1.5, -0.4, 0.2]),
        ("SL2R", [0.1, 0.2, 1.7]),
        ("SL2R", [2e-6, 1e-6, 0.0]),
    ],
)
def test_log_inverts_exp(group, coords):
    ctx = get_context(group)
    result = log_group(exp_group(AlgebraElement(ctx, coords)))
    assert result.in_image
    np.testing.assert_allclose(result.principal.coords, coords, atol=1e-10)


def test_so3_log_at_half_turn_is_a_branch_family():
    ctx = get_context("SO3")
    x = AlgebraElement(ctx, [0.0, math.pi, 0.0])
    result = log_group(exp_group(x))
    assert result.status == LogStatus.BRANCH_FAMILY
    assert abs(abs(result.principal.coords[1]) - math.pi) < 1e-7
    candidates = result.candidates(hint=np.array([0.0, -3.0, 0.0]))
    assert any(np.allclose(c, [0.0, -math.pi, 0.0], atol=1e-7) for c in candidates)


def test_so3_log_prefers_principal_angle():
    ctx = get_context("SO3")
    result = log_group(exp_group(AlgebraElement(ctx, [0.0, 0.0, 4.0])))
    assert result.status == LogStatus.UNIQUE
    np.testing.assert_allclose(result.principal.coords, [0.0, 0.0, 4.0 - 2 * math.pi], atol=1e-12)
    assert any(np.allclose(c, [0.0, 0.0, 4.0]) for c in result.candidates())


def test_sl2r_minus_identity():
    ctx = get_context("SL2R")
    result = log_group(GroupElement(ctx, -np.eye(2)))
    assert result.status == LogStatus.BRANCH_FAMILY
    assert result.branch_rule == "minus_identity"
    np.testing.assert_allclose(exp_group(result.principal).matrix, -np.eye(2), atol=1e-14)
    hinted = result.candidates(hint=np.array([0.0, 0.0, 1.0]))
    assert any(np.allclose(c, [0.0, 0.0, 2 * math.pi]) for c in hinted)


def test_sl2r_trace_below_minus_two_is_not_in_image():
    ctx = get_context("SL2R")
    b = 0.3
    g = GroupElement(ctx, -np.diag([math.exp(math.pi * b), math.exp(-math.pi * b)]))
    result = log_group(g)
    assert result.status == LogStatus.NOT_IN_IMAGE
    assert not result.in_image
    assert result.candidates() == []
    rebuilt = result.center_factor.matrix @ exp_group(result.principal).matrix
    np.testing.assert_allclose(rebuilt, g.matrix, atol=1e-12)


@pytest.mark.parametrize("gap", [3e-5, 3e-4, 5e-4, 1e-3])
def test_sl2r_log_just_inside_minus_identity(gap):
    ctx = get_context("SL2R")
    g = exp_group(AlgebraElement(ctx, [0.0, 0.0, 2.0 * (math.pi - gap)]))
    result = log_group(g)
    assert result.status == LogStatus.BRANCH_FAMILY
    assert result.branch_rule != "minus_identity"
    np.testing.assert_allclose(exp_group(result.principal).matrix, g.matrix, atol=1e-10)
    np.testing.assert_allclose(result.principal.coords, [0.0, 0.0, 2.0 * (math.pi - gap)], atol=1e-8)


@pytest.mark.parametrize("b", [1e-5, 1e-3])
def test_sl2r_just_below_minus_two_is_not_in_image(b):
    ctx = get_context("SL2R")
    g = GroupElement(ctx, -np.diag([math.exp(math.pi * b), math.exp(-math.pi * b)]))
    result = log_group(g)
    assert result.status == LogStatus.NOT_IN_IMAGE
    rebuilt = result.center_factor.matrix @ exp_group(result.principal).matrix
    np.testing.assert_allclose(rebuilt, g.matrix, atol=1e-12)


def test_sl2r_hyperbolic_log_is_unique():
    ctx = get_context("SL2R")
    result = log_group(GroupElement(ctx, np.diag([2.0, 0.5])))
    assert result.status == LogStatus.UNIQUE
    np.testing.assert_allclose(result.principal.coords, [2 * math.log(2.0), 0.0, 0.0], atol=1e-14)


def test_log_rejects_matrices_off_the_group():
    ctx = get_context("SO3")
    with pytest.raises(InvalidGroupElement):
        log_group(GroupElement(ctx, np.diag([1.0, 1.0, 1.01])))


def test_operations_refuse_mixed_groups():
    x = AlgebraElement(get_context("SO3"), [1.0, 0.0, 0.0])
    y = AlgebraElement(get_context("SL2R"), [1.0, 0.0, 0.0])
    with pytest.raises(ContextError):
        bracket(x, y)


@pytest.mark.parametrize("group", GROUPS)
def test_adjoint_is_conjugation_and_a_morphism(group):
    rng = np.random.default_rng(4)
    g = exp_group(_random(group, rng))
    x, y = _random(group, rng), _random(group, rng)
    conj = g.matrix @ x.matrix @ g.inverse().matrix
    np.testing.assert_allclose(adjoint(g, x).matrix, conj, atol=1e-11)
    lhs = adjoint(g, bracket(x, y))
    rhs = bracket(adjoint(g, x), adjoint(g, y))
    np.testing.assert_allclose(lhs.coords, rhs.coords, atol=1e-10)


@pytest.mark.parametrize("group", GROUPS)
def test_ad_star_is_dual_to_the_bracket(group):
    rng = np.random.default_rng(5)
    ctx = get_context(group)
    x, y = _random(group, rng), _random(group, rng)
    mu = CoalgebraElement(ctx, rng.normal(size=3))
    assert pairing(ad_star(x, mu), y) == pytest.approx(pairing(mu, bracket(x, y)), abs=1e-13)


@pytest.mark.parametrize("group", GROUPS)
def test_coadjoint_is_a_left_action_preserving_the_casimir(group):
    rng = np.random.default_rng(6)
    ctx = get_context(group)
    g, h = exp_group(_random(group, rng)), exp_group(_random(group, rng))
    mu = CoalgebraElement(ctx, rng.normal(size=3))
    np.testing.assert_allclose(coadjoint(g @ h, mu).coords, coadjoint(g, coadjoint(h, mu)).coords, atol=1e-10)
    assert coadjoint(g, mu).casimir() == pytest.approx(mu.casimir(), rel=1e-10, abs=1e-10)
    x = _random(group, rng)
    # <Ad*_{g^-1} mu, Ad_g x> = <mu, x>
    assert pairing(coadjoint(g, mu), adjoint(g, x)) == pytest.approx(pairing(mu, x), abs=1e-10)


@pytest.mark.parametrize("group", GROUPS)
def test_kirillov_is_antisymmetric(group):
    rng = np.random.default_rng(7)
    ctx = get_context(group)
    eta = CoalgebraElement(ctx, rng.normal(size=3))
    x, y = _random(group, rng), _random(group, rng)
    assert kirillov(eta, x, y) == pytest.approx(-kirillov(eta, y, x), abs=1e-13)
    assert kirillov(eta, x, x) == pytest.approx(0.0, abs=1e-13)
    assert kirillov(eta, x, y) == pytest.approx(pairing(ad_star(x, eta), y), abs=1e-13)


def test_so3_kirillov_on_the_unit_sphere():
    ctx = get_context("SO3")
    eta = CoalgebraElement.dual_basis_element(ctx, 2)
    e1, e2 = AlgebraElement.basis_element(ctx, 0), AlgebraElement.basis_element(ctx, 1)
    assert kirillov(eta, e1, e2) == pytest.approx(1.0)
