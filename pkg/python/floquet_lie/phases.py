"""Homotopies of a periodic curve and the dynamic/geometric split of its log phase.

Along a homotopy ``phi(s, .)`` with ``phi(0, .) = 0`` the continued log ``k(s)`` splits as
``k = k_dyn + k_geom`` with

- ``k_dyn(s) = int_0^T Ad_{p^-1} phi dt``;
- ``k_geom(s) = int_0^s int_0^1 [D_u p^-1, D_tau p^-1] dtau du`` on the normalized
  cylinder ``(u, tau)``, oriented by ``du ^ dtau``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.linalg import expm

from .config import DEFAULT_TOLERANCES, GridSpec, HomotopyKind, Tolerances
from .errors import HomotopyUnavailable, ResolutionError
from .floquet import (
    FloquetFactorization,
    MonodromyReport,
    classify_monodromy,
    continue_log_branch,
    distinct_candidates,
    floquet_factor,
    monodromy,
    phi_on_grid,
    principal_log,
)
from .integrator import (
    Homotopy,
    LinearHomotopy,
    PeriodicCurve,
    SampledHomotopy,
    d_operator_grid,
    grid_derivative,
    solve_family,
    solve_fundamental,
)
from .lie_core import AlgebraElement, CoalgebraElement, LieContext

__all__ = [
    "PhaseReport",
    "SWEEP_COLUMNS",
    "build_linear_homotopy",
    "build_geodesic_homotopy",
    "dynamic_phase",
    "dynamic_phase_pairing",
    "linear_euler_hamiltonian",
    "geometric_phase",
    "geometric_phase_surface",
    "split_phases",
    "zero_curvature_residual",
]

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "s",
    "period",
    "k_1",
    "k_2",
    "k_3",
    "k_dyn_1",
    "k_dyn_2",
    "k_dyn_3",
    "k_geom_1",
    "k_geom_2",
    "k_geom_3",
    "splitting_residual",
    "periodicity_residual",
    "max_drift",
)

MIN_S_NODES = 9


def build_linear_homotopy(curve: PeriodicCurve) -> LinearHomotopy:
    """``phi(s, t) = s phi(t)``."""
    return LinearHomotopy(curve)


def _continuous_loop_log(context: LieContext, loop: np.ndarray, tolerances: Tolerances) -> np.ndarray:
    logs = np.empty((len(loop), context.dim))
    prev = np.zeros(context.dim)
    for j, mat in enumerate(loop):
        result = context.log(mat, window=tolerances.log_window)
        if not result.in_image:
            raise HomotopyUnavailable(f"Floquet loop leaves the exponential image at node {j}")
        candidates = distinct_candidates(result.candidates(hint=prev))
        dists = [float(np.linalg.norm(c - prev)) for c in candidates]
        best = int(np.argmin(dists))
        if dists[best] > tolerances.branch_jump:
            raise HomotopyUnavailable(f"Log of the Floquet loop jumps by {dists[best]:.3e} at node {j}")
        prev = candidates[best]
        logs[j] = prev
    return logs


def _dexp_operators(context: LieContext, coords: np.ndarray) -> np.ndarray:
    """``(exp(ad_X) - I) / ad_X`` for a stack of algebra elements."""
    dim = context.dim
    block = np.zeros(coords.shape[:-1] + (2 * dim, 2 * dim))
    block[..., :dim, :dim] = context.ad_matrix(coords)
    block[..., :dim, dim:] = np.eye(dim)
    return expm(block)[..., :dim, dim:]


def build_geodesic_homotopy(
    context: LieContext,
    p_loop: np.ndarray,
    k: np.ndarray,
    period: float,
    n_s: int,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> SampledHomotopy:
    """Contract the Floquet loop along ``p(s, t) = exp(s log p(t))`` with ``k(s) = s k``.

    Args:
        context: Group of the loop.
        p_loop: ``p(t_j)`` for ``t_j = j T / N``, ``j = 0..N`` (endpoint included).
        k: The log phase of the full system.
        period: ``T``.
        n_s: Number of s-intervals of the sampled family.

    Raises:
        HomotopyUnavailable: If ``t -> log p(t)`` is not continuous or does not close.
    """
    p_loop = np.asarray(p_loop, dtype=float)
    k = np.asarray(k, dtype=float)
    logs = _continuous_loop_log(context, p_loop, tolerances)
    if np.linalg.norm(logs[-1]) > math.sqrt(tolerances.periodicity):
        raise HomotopyUnavailable("Continuous log of the Floquet loop does not return to zero")
    logs = logs[:-1]
    n = logs.shape[0]
    omega = 2 * math.pi * np.fft.rfftfreq(n, d=period / n)
    spectrum = np.fft.rfft(logs, axis=0) * (1j * omega)[:, None]
    if n % 2 == 0:
        spectrum[-1] = 0.0
    dlogs = np.fft.irfft(spectrum, n=n, axis=0)

    s_grid = np.linspace(0.0, 1.0, n_s + 1)
    curves = []
    for s in s_grid:
        dt_p = np.einsum("nij,nj->ni", _dexp_operators(context, s * logs), s * dlogs)
        p_s = context.exp(s * logs)
        phi = dt_p + context.adjoint_coords(p_s, np.broadcast_to(s * k, logs.shape)) / period
        curves.append(PeriodicCurve.from_samples(context, phi, period))
    logger.info("built geodesic homotopy on %d s-nodes", len(s_grid))
    return SampledHomotopy(context, s_grid, curves, kind="geodesic")


def _dynamic_phases(factor: FloquetFactorization, phi: np.ndarray) -> np.ndarray:
    ctx = factor.context
    integrand = ctx.adjoint_coords(factor.inverse_values(), phi)
    times = factor.tau[None, :] * factor.periods[:, None]
    return np.stack([simpson(integrand[i], x=times[i], axis=0) for i in range(len(factor.s_grid))])


def dynamic_phase(factor: FloquetFactorization, homotopy: Homotopy, s_idx: int) -> AlgebraElement:
    """``k_dyn(s) = int_0^T(s) Ad_{p^-1} phi dt`` by composite Simpson quadrature."""
    phi = phi_on_grid(factor, homotopy)
    return AlgebraElement(factor.context, _dynamic_phases(factor, phi)[s_idx])


def linear_euler_hamiltonian(xi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """``H_t(xi) = -<xi, phi(t)>``, sample by sample."""
    return -np.einsum("...i,...i->...", xi, phi)


def dynamic_phase_pairing(
    mu: CoalgebraElement, factor: FloquetFactorization, homotopy: Homotopy, s_idx: int
) -> float:
    """``<mu, k_dyn>`` as minus the time integral of ``H_t(xi) = -<xi, phi>`` along ``xi = Ad*_{p^-1} mu``."""
    ctx = factor.context
    s = float(factor.s_grid[s_idx])
    period = float(factor.periods[s_idx])
    times = factor.tau * period
    phi = homotopy.curve_at(s)(times)
    ad_inv = ctx.adjoint_matrix(ctx.inverse(factor.p[s_idx]))
    xi = np.einsum("nji,j->ni", ad_inv, mu.coords)
    hamiltonian = linear_euler_hamiltonian(xi, phi)
    return float(-simpson(hamiltonian, x=times))


def _cylinder_derivatives(factor: FloquetFactorization, phi: np.ndarray):
    """``D_u p^-1`` by s-stencils and ``D_tau p^-1 = k - T Ad_{p^-1} phi`` on the whole grid."""
    s_grid = factor.s_grid
    if len(s_grid) < MIN_S_NODES:
        raise ResolutionError(f"Geometric phase needs at least {MIN_S_NODES} s-nodes, got {len(s_grid)}")
    ctx = factor.context
    h_s = float(s_grid[1] - s_grid[0])
    inverse = factor.inverse_values()
    d_u = d_operator_grid(ctx, inverse, h_s, axis=0, mode="one_sided")
    d_tau = factor.k[:, None, :] - factor.periods[:, None, None] * ctx.adjoint_coords(inverse, phi)
    return inverse, d_u, d_tau


def _integrate_cylinder(factor: FloquetFactorization, integrand: np.ndarray) -> np.ndarray:
    inner = simpson(integrand, x=factor.tau, axis=1)
    return cumulative_simpson(inner, x=factor.s_grid, axis=0, initial=0.0)


def _geometric_phases(factor: FloquetFactorization, phi: np.ndarray) -> np.ndarray:
    _, d_u, d_tau = _cylinder_derivatives(factor, phi)
    return _integrate_cylinder(factor, factor.context.bracket_coords(d_u, d_tau))


def geometric_phase(factor: FloquetFactorization, homotopy: Homotopy, s_idx: int) -> AlgebraElement:
    """Double integral of ``[D_u p^-1, D_tau p^-1]`` over ``[0, s] x [0, 1]``.

    Raises:
        ResolutionError: With fewer than nine s-nodes.
    """
    phi = phi_on_grid(factor, homotopy)
    return AlgebraElement(factor.context, _geometric_phases(factor, phi)[s_idx])


def _surface_integrals(factor: FloquetFactorization, phi: np.ndarray, covectors: np.ndarray) -> np.ndarray:
    ctx = factor.context
    inverse, d_u, d_tau = _cylinder_derivatives(factor, phi)
    # x_u = -D_u p and x_tau = -D_tau p, both read off the p^-1 derivatives
    x_u = ctx.adjoint_coords(factor.p, d_u)
    x_tau = ctx.adjoint_coords(factor.p, d_tau)
    tangent = ctx.bracket_coords(x_u, x_tau)
    ad_inv = ctx.adjoint_matrix(inverse)
    out = []
    for mu in covectors:
        orbit_point = np.einsum("...ji,j->...i", ad_inv, mu)
        out.append(_integrate_cylinder(factor, np.einsum("...i,...i->...", orbit_point, tangent)))
    return np.stack(out)


def geometric_phase_surface(
    mu: CoalgebraElement, factor: FloquetFactorization, homotopy: Homotopy, s_idx: int
) -> float:
    """Integral of the pulled-back Kirillov form over the cylinder ``F(u, tau) = Ad*_{p^-1} mu``."""
    phi = phi_on_grid(factor, homotopy)
    return float(_surface_integrals(factor, phi, mu.coords[None, :])[0, s_idx])


def zero_curvature_residual(
    context: LieContext, sigma: np.ndarray, h_s: float, h_t: float, periodic_t: bool = False
) -> float:
    """Largest interior ``|d_s D_t sigma - d_t D_s sigma + [D_t sigma, D_s sigma]|``.

    ``sigma`` has shape ``(N_s + 1, N_t (+1), n, n)``; with ``periodic_t`` the t-samples
    cover one period without the repeated endpoint.
    """
    t_mode = "periodic" if periodic_t else "one_sided"
    d_s = d_operator_grid(context, sigma, h_s, axis=0, mode="one_sided")
    d_t = d_operator_grid(context, sigma, h_t, axis=1, mode=t_mode)
    residual = (
        grid_derivative(d_t, h_s, axis=0)
        - grid_derivative(d_s, h_t, axis=1, mode=t_mode)
        + context.bracket_coords(d_t, d_s)
    )
    interior = residual[2:-2] if periodic_t else residual[2:-2, 2:-2]
    return float(np.max(np.linalg.norm(interior, axis=-1), initial=0.0))


@dataclass
class PhaseReport:
    """Log phase and its dynamic/geometric split at every node of the s-grid."""

    context: LieContext
    homotopy_kind: str
    k_rule: str
    s_grid: np.ndarray
    periods: np.ndarray
    k: np.ndarray
    k_dyn: np.ndarray
    k_geom: np.ndarray
    splitting_residuals: np.ndarray
    periodicity_residuals: np.ndarray
    row_drift: np.ndarray
    curvature_residual: float
    surface_check: List[float]
    monodromy: MonodromyReport
    n_t: int
    factor: Optional[FloquetFactorization] = field(default=None, repr=False)
    homotopy: Optional[Homotopy] = field(default=None, repr=False)

    @property
    def splitting_residual(self) -> float:
        return float(np.max(self.splitting_residuals))

    @property
    def periodicity_residual(self) -> float:
        return float(np.max(self.periodicity_residuals))

    def final(self, name: str) -> AlgebraElement:
        return AlgebraElement(self.context, getattr(self, name)[-1])

    def sweep_rows(self) -> List[Dict[str, float]]:
        rows = []
        for i, s in enumerate(self.s_grid):
            values = [s, self.periods[i], *self.k[i], *self.k_dyn[i], *self.k_geom[i]]
            values += [self.splitting_residuals[i], self.periodicity_residuals[i], self.row_drift[i]]
            rows.append(dict(zip(SWEEP_COLUMNS, (float(v) for v in values))))
        return rows

    def to_record(self) -> Dict[str, Any]:
        return {
            "k": self.k[-1].tolist(),
            "k_dyn": self.k_dyn[-1].tolist(),
            "k_geom": self.k_geom[-1].tolist(),
            "splitting_residual": self.splitting_residual,
            "curvature_residual": self.curvature_residual,
            "periodicity_residual": self.periodicity_residual,
            "surface_check": list(self.surface_check),
            "homotopy_kind": self.homotopy_kind,
            "branch_rule": self.k_rule,
            "grid": {"N_t": self.n_t, "N_s": len(self.s_grid) - 1},
        }


def _resolve_homotopy(
    curve: Optional[PeriodicCurve],
    homotopy: Union[HomotopyKind, Homotopy],
    grid: GridSpec,
    tolerances: Tolerances,
) -> Tuple[Homotopy, Optional[str]]:
    """Build the requested homotopy; the second item explains a fallback to the linear one."""
    if isinstance(homotopy, Homotopy):
        return homotopy, None
    if curve is None:
        raise ValueError("A curve is required unless a homotopy object is given")
    if homotopy == "linear":
        return build_linear_homotopy(curve), None
    solution = solve_fundamental(curve, grid.n_t, tolerance=tolerances.drift)
    k = principal_log(monodromy(solution, tolerances=tolerances))
    tau = np.linspace(0.0, 1.0, grid.n_t + 1)
    p_loop = solution.values @ curve.context.exp(-tau[:, None] * k)
    try:
        return build_geodesic_homotopy(curve.context, p_loop, k, curve.period, grid.n_s, tolerances), None
    except HomotopyUnavailable as exc:
        logger.warning("geodesic homotopy unavailable (%s); falling back to the linear homotopy", exc)
        return build_linear_homotopy(curve), str(exc)


def split_phases(
    curve: Optional[PeriodicCurve] = None,
    grid: GridSpec | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    homotopy: Union[HomotopyKind, Homotopy] = "linear",
    threads: int = 1,
) -> PhaseReport:
    """Run homotopy, family solve, branch continuation, factorization and both phases.

    Args:
        curve: The periodic curve ``phi``; optional when ``homotopy`` is a ready family.
        grid: ``N_t`` and ``N_s``.
        tolerances: Pipeline tolerances.
        homotopy: ``"linear"``, ``"geodesic"`` or a :class:`Homotopy` instance.
        threads: Worker threads for the family solve.

    Returns:
        The phase report, including the factor grid it was computed from.

    Raises:
        UniformReducibilityViolated: Some monodromy along the family is not an exponential.
        BranchAmbiguity: The s-grid is too coarse to follow the log branch.
        FactorizationError: The chosen logs do not make ``p`` periodic.
    """
    grid = grid or GridSpec()
    family_def, fallback = _resolve_homotopy(curve, homotopy, grid, tolerances)
    ctx = family_def.context
    family = solve_family(family_def, grid.n_s, grid.n_t, tolerance=tolerances.drift, threads=threads)
    branch = continue_log_branch(family.monodromies(), family.s_grid, k0=family_def.base_log, tolerances=tolerances)
    if family_def.kind == "geodesic":
        k_rule = "geodesic: s * principal log"
    elif family_def.base_log is not None:
        k_rule = "continued from the rest-point log T(0) * phi(0)"
    else:
        k_rule = "continued from k(0) = 0"
    homotopy_kind = family_def.kind
    if fallback is not None:
        homotopy_kind = "linear (geodesic unavailable)"
        k_rule = f"{k_rule}; geodesic homotopy unavailable: {fallback}"
    factor = floquet_factor(family, branch.k, tolerances, k_rule=k_rule)

    phi = phi_on_grid(factor, family_def)
    k_dyn = _dynamic_phases(factor, phi)
    k_geom = _geometric_phases(factor, phi)
    splitting = np.linalg.norm(branch.k - k_dyn - k_geom, axis=-1)
    if np.max(splitting) > tolerances.splitting:
        logger.warning(
            "splitting residual %.3e exceeds %.1e; refine N_s or N_t", float(np.max(splitting)), tolerances.splitting
        )

    surface = _surface_integrals(factor, phi, np.eye(ctx.dim))[:, -1]
    surface_check = [float(abs(surface[i] - k_geom[-1, i])) for i in range(ctx.dim)]
    curvature = zero_curvature_residual(
        ctx, factor.inverse_values()[:, :-1], float(factor.s_grid[1] - factor.s_grid[0]), 1.0 / grid.n_t, True
    )
    final = classify_monodromy(family.rows[-1].monodromy(), tolerances)
    final.max_drift = family.rows[-1].max_drift
    logger.info(
        "k=%s k_dyn=%s k_geom=%s splitting residual %.3e",
        branch.k[-1],
        k_dyn[-1],
        k_geom[-1],
        float(np.max(splitting)),
    )
    return PhaseReport(
        context=ctx,
        homotopy_kind=homotopy_kind,
        k_rule=k_rule,
        s_grid=factor.s_grid,
        periods=factor.periods,
        k=branch.k,
        k_dyn=k_dyn,
        k_geom=k_geom,
        splitting_residuals=splitting,
        periodicity_residuals=factor.periodicity_residuals,
        row_drift=np.array([row.max_drift for row in family.rows]),
        curvature_residual=curvature,
        surface_check=surface_check,
        monodromy=final,
        n_t=grid.n_t,
        factor=factor,
        homotopy=family_def,
    )
