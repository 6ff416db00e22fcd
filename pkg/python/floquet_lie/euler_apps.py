"""Linear Euler flows and the rigid-body reconstruction phase.

The free rigid body lives on ``so(3)*`` with ``h(xi) = 1/2 sum xi_i^2 / I_i`` and moves by
``d xi / dt = -ad*_{dh/dxi} xi = omega x xi`` with ``omega = xi / I``. Orbits near the
largest-moment axis are closed; a one-parameter family of them, contracted to the rest
point on that axis, feeds the phase pipeline with ``phi(s, t) = omega_s(t)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .config import DEFAULT_TOLERANCES, GridSpec, Tolerances
from .errors import OracleUnavailable, OrbitDetectionError
from .integrator import PeriodicCurve, SampledHomotopy, solve_fundamental
from .lie_core import AlgebraElement, CoalgebraElement, GroupElement, LieContext, coadjoint, get_context, pairing
from .phases import PhaseReport, geometric_phase_surface, split_phases

__all__ = [
    "EulerTrajectory",
    "RigidBodyOrbit",
    "RigidBodyFamily",
    "ReconstructionRecord",
    "linear_euler_flow",
    "coadjoint_euler_flow",
    "euler_vector_field",
    "sl2_euler_coords",
    "rigid_body_energy",
    "rigid_body_gradient",
    "rigid_body_family",
    "reconstruction_phases",
    "spherical_area_oracle",
    "polar_cap_area",
]

logger = logging.getLogger(__name__)

Series = Union[float, Sequence[Sequence[float]], np.ndarray]


@dataclass
class EulerTrajectory:
    context: LieContext
    kind: Literal["algebra", "coalgebra"]
    times: np.ndarray
    points: np.ndarray
    casimirs: np.ndarray
    energies: Optional[np.ndarray] = None

    @property
    def casimir_drift(self) -> float:
        return float(np.max(np.abs(self.casimirs - self.casimirs[0])))

    @property
    def energy_drift(self) -> Optional[float]:
        """Largest change of the traced energy, ``None`` when no energy was traced."""
        if self.energies is None:
            return None
        return float(np.max(np.abs(self.energies - self.energies[0])))

    def at(self, index: int) -> Union[AlgebraElement, CoalgebraElement]:
        cls = AlgebraElement if self.kind == "algebra" else CoalgebraElement
        return cls(self.context, self.points[index])


def _quadratic(metric: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", points, metric, points)


def linear_euler_flow(curve: PeriodicCurve, x0: AlgebraElement, n_t: int = 1024, periods: int = 1) -> EulerTrajectory:
    """``x(t) = Ad_{f(t)} x0``, the flow of ``dx/dt = [phi(t), x]``."""
    ctx = curve.context
    solution = solve_fundamental(curve, n_t, periods=periods)
    points = ctx.adjoint_coords(solution.values, np.broadcast_to(x0.coords, (len(solution.times), ctx.dim)))
    return EulerTrajectory(ctx, "algebra", solution.times, points, _quadratic(ctx.invariant_metric, points))


def coadjoint_euler_flow(
    curve: PeriodicCurve,
    xi0: CoalgebraElement,
    n_t: int = 1024,
    periods: int = 1,
    inertia: Optional[Sequence[float]] = None,
) -> EulerTrajectory:
    """``xi(t) = Ad*_{f(t)^-1} xi0``, the flow of ``d xi/dt = -ad*_{phi(t)} xi``.

    With ``inertia`` the rigid-body energy ``h(xi(t))`` is traced too; it stays constant
    when ``phi`` is the angular velocity ``dh/dxi`` along this same trajectory.
    """
    ctx = curve.context
    solution = solve_fundamental(curve, n_t, periods=periods)
    ad_inv = ctx.adjoint_matrix(ctx.inverse(solution.values))
    points = np.einsum("nji,j->ni", ad_inv, xi0.coords)
    energies = None if inertia is None else rigid_body_energy(np.asarray(inertia, dtype=float), points)
    return EulerTrajectory(ctx, "coalgebra", solution.times, points, _quadratic(ctx.invariant_metric, points), energies)


def euler_vector_field(context: LieContext, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``ad_w x`` in coordinates: ``w x x`` on so(3), ``diag(1, 1, -1)(w x x)`` on sl(2, R)."""
    return context.invariant_metric @ np.cross(w, x)


def _as_series(a: Series) -> np.ndarray:
    if np.isscalar(a):
        return np.array([[float(a), 0.0]])
    return np.asarray(a, dtype=float).reshape(-1, 2)


def sl2_euler_coords(a1: Series, a2: Series, a3: Series, period: float = 2 * math.pi) -> PeriodicCurve:
    """Curve of ``[[a1, a2], [a3, -a1]]`` in sl(2, R) coordinates ``(2 a1, -a2 - a3, a2 - a3)``.

    Each ``a_i`` is a constant or a list of ``(cos, sin)`` pairs starting at harmonic 0.
    """
    series = [_as_series(a) for a in (a1, a2, a3)]
    harmonics = max(s.shape[0] for s in series)
    padded = np.zeros((3, harmonics, 2))
    for i, s in enumerate(series):
        padded[i, : s.shape[0]] = s
    mix = np.array([[2.0, 0.0, 0.0], [0.0, -1.0, -1.0], [0.0, 1.0, -1.0]])
    return PeriodicCurve.fourier(get_context("SL2R"), np.einsum("ij,jnk->ink", mix, padded), period)


def rigid_body_energy(inertia: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(np.asarray(xi) ** 2 / np.asarray(inertia), axis=-1)


def rigid_body_gradient(inertia: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """``dh/dxi``, the angular velocity."""
    return np.asarray(xi) / np.asarray(inertia)


@dataclass
class RigidBodyOrbit:
    s: float
    polar_angle: float
    base_point: np.ndarray
    period: float
    times: np.ndarray
    points: np.ndarray
    closure_error: float
    energy_drift: float
    casimir_drift: float

    def angular_velocity(self, inertia: np.ndarray) -> np.ndarray:
        return rigid_body_gradient(inertia, self.points)


@dataclass
class RigidBodyFamily:
    """Closed orbits ``gamma_s`` through ``xi0_s = r (cos(s theta_max) e_a + sin(s theta_max) e_b)``."""

    inertia: np.ndarray
    radius: float
    theta_max: float
    axis: int
    s_grid: np.ndarray
    orbits: List[RigidBodyOrbit]
    n_t: int
    degenerate: bool = False
    _report: Optional[PhaseReport] = field(default=None, repr=False)

    @property
    def context(self) -> LieContext:
        return get_context("SO3")

    @property
    def base_points(self) -> np.ndarray:
        return np.stack([orbit.base_point for orbit in self.orbits])

    @property
    def periods(self) -> np.ndarray:
        return np.array([orbit.period for orbit in self.orbits])

    def base_log(self) -> np.ndarray:
        """Log of the monodromy at the rest point: ``T(0) xi0_0 / I``."""
        first = self.orbits[0]
        return first.period * rigid_body_gradient(self.inertia, first.base_point)

    def homotopy(self) -> SampledHomotopy:
        ctx = self.context
        curves = [
            PeriodicCurve.from_samples(ctx, orbit.angular_velocity(self.inertia)[:-1], orbit.period)
            for orbit in self.orbits
        ]
        return SampledHomotopy(ctx, self.s_grid, curves, kind="rigid_body", base_log=self.base_log())

    def phase_report(self, tolerances: Tolerances = DEFAULT_TOLERANCES, threads: int = 1) -> PhaseReport:
        """Run the phase pipeline once and keep the result."""
        if self._report is None:
            grid = GridSpec(N_t=self.n_t, N_s=len(self.s_grid) - 1)
            self._report = split_phases(homotopy=self.homotopy(), grid=grid, tolerances=tolerances, threads=threads)
        return self._report


def _linear_frequency(inertia: np.ndarray, radius: float, axis: int) -> float:
    b, c = (axis + 1) % 3, (axis + 2) % 3
    inv = 1.0 / inertia
    return radius * math.sqrt((inv[b] - inv[axis]) * (inv[c] - inv[axis]))


def _stationary_orbit(s: float, theta: float, base: np.ndarray, period: float, n_t: int) -> RigidBodyOrbit:
    times = np.linspace(0.0, period, n_t + 1)
    points = np.broadcast_to(base, (n_t + 1, 3)).copy()
    return RigidBodyOrbit(s, theta, base, period, times, points, 0.0, 0.0, 0.0)


def _closed_orbit(
    s: float,
    theta: float,
    base: np.ndarray,
    inertia: np.ndarray,
    axis: int,
    period_guess: float,
    n_t: int,
    tolerances: Tolerances,
) -> RigidBodyOrbit:
    normal = (axis + 2) % 3

    def rhs(_t, xi):
        return np.cross(xi / inertia, xi)

    def section(_t, xi):
        return xi[normal]

    section.direction = float(np.sign(rhs(0.0, base)[normal])) or 1.0
    sol = solve_ivp(
        rhs,
        (0.0, 4.0 * period_guess),
        base,
        method="DOP853",
        rtol=1e-12,
        atol=1e-12,
        events=section,
        dense_output=True,
    )
    crossings = [t for t in sol.t_events[0] if t > 0.25 * period_guess]
    if not crossings:
        raise OrbitDetectionError(f"Orbit at s={s:.6g} does not return to its section within {4 * period_guess:.4g}")
    period = float(crossings[0])
    closure = float(np.linalg.norm(sol.sol(period) - base))
    if not closure <= tolerances.closure:
        raise OrbitDetectionError(f"Orbit at s={s:.6g} misses its start by {closure:.3e}")
    times = np.linspace(0.0, period, n_t + 1)
    points = sol.sol(times).T
    points[-1] = base
    energy = rigid_body_energy(inertia, points)
    casimir = np.linalg.norm(points, axis=-1)
    return RigidBodyOrbit(
        s,
        theta,
        base,
        period,
        times,
        points,
        closure,
        float(np.max(np.abs(energy - energy[0]))),
        float(np.max(np.abs(casimir - casimir[0]))),
    )


def rigid_body_family(
    inertia: Sequence[float],
    orbit_radius: float = 1.0,
    n_s: int = 16,
    theta_max: float = 0.5,
    n_t: int = 1024,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> RigidBodyFamily:
    """Sample closed orbits around the largest-moment axis on ``n_s + 1`` polar angles.

    Raises:
        OrbitDetectionError: If the largest moment is shared by two axes or some orbit
            does not close.
    """
    inertia = np.asarray(inertia, dtype=float)
    if inertia.shape != (3,) or np.any(inertia <= 0):
        raise ValueError("Inertia must be three positive principal moments")
    if orbit_radius <= 0:
        raise ValueError("Orbit radius must be positive")
    axis = int(np.argmax(inertia))
    side = (axis + 1) % 3
    s_grid = np.linspace(0.0, 1.0, n_s + 1)
    degenerate = bool(np.allclose(inertia, inertia[0]))
    if not degenerate and np.sum(np.isclose(inertia, inertia[axis])) > 1:
        raise OrbitDetectionError("The largest principal moment is not unique; no stable axis to anchor the family")

    orbits = []
    if degenerate:
        period_guess = 2 * math.pi * inertia[0] / orbit_radius
    else:
        period_guess = 2 * math.pi / _linear_frequency(inertia, orbit_radius, axis)
    for s in s_grid:
        theta = float(s * theta_max)
        base = np.zeros(3)
        base[axis] = orbit_radius * math.cos(theta)
        base[side] = orbit_radius * math.sin(theta)
        if degenerate or s == 0.0:
            orbits.append(_stationary_orbit(float(s), theta, base, period_guess, n_t))
        else:
            orbits.append(_closed_orbit(float(s), theta, base, inertia, axis, period_guess, n_t, tolerances))
    logger.info(
        "rigid body family: %d orbits, periods %.6g .. %.6g",
        len(orbits),
        orbits[0].period,
        orbits[-1].period,
    )
    return RigidBodyFamily(inertia, float(orbit_radius), float(theta_max), axis, s_grid, orbits, n_t, degenerate)


@dataclass
class ReconstructionRecord:
    s: float
    period: float
    k: np.ndarray
    k_dyn: np.ndarray
    k_geom: np.ndarray
    rec1: float
    rec2: float
    rec3: float
    dynamic_pairing: float
    geometric_pairing: float
    isotropy_residual: float
    degenerate: bool = False

    def checks(self, tolerance: float = 1e-8) -> Dict[str, bool]:
        return {
            "rec1_equals_rec3": abs(self.rec1 - self.rec3) <= tolerance,
            "dynamic_equals_rec3": abs(self.dynamic_pairing - self.rec3) <= tolerance,
            "geometric_equals_rec2": abs(self.geometric_pairing - self.rec2) <= tolerance,
            "monodromy_isotropy": self.isotropy_residual <= tolerance,
        }

    def to_record(self) -> Dict[str, Any]:
        return {
            "s": self.s,
            "period": self.period,
            "k": self.k.tolist(),
            "k_dyn": self.k_dyn.tolist(),
            "k_geom": self.k_geom.tolist(),
            "rec1": self.rec1,
            "rec2": self.rec2,
            "rec3": self.rec3,
            "dynamic_pairing": self.dynamic_pairing,
            "geometric_pairing": self.geometric_pairing,
            "isotropy_residual": self.isotropy_residual,
            "degenerate": self.degenerate,
        }


def reconstruction_phases(
    family: RigidBodyFamily,
    s_idx: int = -1,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    threads: int = 1,
) -> ReconstructionRecord:
    """Dynamic and geometric reconstruction phases of ``gamma_s`` and their independent evaluations."""
    ctx = family.context
    orbit = family.orbits[s_idx]
    base = orbit.base_point
    rec3 = 2.0 * orbit.period * float(rigid_body_energy(family.inertia, base))
    omega = orbit.angular_velocity(family.inertia)
    rec1 = float(simpson(np.einsum("ni,ni->n", orbit.points, omega), x=orbit.times))

    if family.degenerate:
        k = orbit.period * rigid_body_gradient(family.inertia, base)
        return ReconstructionRecord(
            orbit.s, orbit.period, k, k.copy(), np.zeros(3), rec1, 0.0, rec3, float(base @ k), 0.0, 0.0, True
        )

    report = family.phase_report(tolerances, threads)
    factor = report.factor
    mu = CoalgebraElement(ctx, base)
    k = report.k[s_idx]
    # m(s) as solved, not exp(k(s))
    m = GroupElement(ctx, factor.reconstruct(s_idx)[-1])
    isotropy = float(np.linalg.norm(coadjoint(m, mu).coords - base))
    rec2 = geometric_phase_surface(mu, factor, report.homotopy, s_idx % len(family.s_grid))
    return ReconstructionRecord(
        orbit.s,
        orbit.period,
        k,
        report.k_dyn[s_idx],
        report.k_geom[s_idx],
        rec1,
        rec2,
        rec3,
        pairing(mu, AlgebraElement(ctx, report.k_dyn[s_idx])),
        pairing(mu, AlgebraElement(ctx, report.k_geom[s_idx])),
        isotropy,
    )


def polar_cap_area(theta: float, radius: float = 1.0) -> float:
    """Kirillov area ``2 pi r (1 - cos theta)`` of a polar cap on the sphere of radius ``r``."""
    return 2 * math.pi * radius * (1.0 - math.cos(theta))


def spherical_area_oracle(family: RigidBodyFamily, s_idx: int = -1) -> float:
    """Signed Kirillov area enclosed by ``gamma_s`` around the stable axis.

    Uses ``r * int (1 - z / r) (x y' - y x') / (x^2 + y^2) dt`` in a right-handed frame with
    ``z`` along the stable axis, so a clockwise orbit seen from ``+z`` gives a negative area.

    Raises:
        OracleUnavailable: If the orbit does not wind exactly once around the axis.
    """
    orbit = family.orbits[s_idx]
    if orbit.polar_angle == 0.0:
        return 0.0
    a = family.axis
    frame = [(a + 1) % 3, (a + 2) % 3, a]
    points = orbit.points[:-1][:, frame]
    velocity = np.cross(rigid_body_gradient(family.inertia, orbit.points[:-1]), orbit.points[:-1])[:, frame]
    x, y, z = points.T
    dx, dy = velocity[:, 0], velocity[:, 1]
    rho2 = x**2 + y**2
    if np.any(rho2 <= 0):
        raise OracleUnavailable("Orbit passes through the stable axis")
    turning = np.unwrap(np.arctan2(y, x))
    closing = math.atan2(y[0], x[0]) - math.atan2(y[-1], x[-1])
    winding = (turning[-1] - turning[0] + (closing + math.pi) % (2 * math.pi) - math.pi) / (2 * math.pi)
    if abs(abs(winding) - 1.0) > 1e-6:
        raise OracleUnavailable(f"Orbit winds {winding:.3f} times around the stable axis")
    r = family.radius
    integrand = (1.0 - z / r) * (x * dy - y * dx) / rho2
    dt = orbit.period / len(x)
    return float(r * np.sum(integrand) * dt)
