"""Monodromy classification, log-branch continuation and the Floquet factor.

With ``tau = t / T(s)`` the fundamental solution splits as
``alpha(s, t) = p(s, t) exp(tau k(s))`` where ``p(s, .)`` is ``T(s)``-periodic and
``exp(k(s))`` is the monodromy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import BranchAmbiguity, FactorizationError, UniformReducibilityViolated
from .integrator import FamilySolution, FundamentalSolution, Homotopy, PeriodicCurve, solve_fundamental
from .lie_core import AlgebraElement, GroupElement, LieContext, LogResult, LogStatus, log_group

__all__ = [
    "MonodromyReport",
    "BranchContinuation",
    "FloquetFactorization",
    "monodromy",
    "classify_monodromy",
    "continue_log_branch",
    "floquet_factor",
    "analytic_dt_p",
    "dt_p_values",
    "phi_on_grid",
    "principal_log",
    "coadjoint_monodromy_residual",
]

logger = logging.getLogger(__name__)

# candidates closer than this are the same log seen twice
_DUPLICATE = 1e-9


@dataclass
class MonodromyReport:
    monodromy: GroupElement
    log: LogResult
    reducible: bool
    adjoint_reducible: bool
    adjoint_log_coords: np.ndarray
    max_drift: float = 0.0

    @property
    def status(self) -> LogStatus:
        return self.log.status

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "status": self.log.status.value,
            "matrix": self.monodromy.matrix.tolist(),
            "principal_log": self.log.principal.coords.tolist(),
            "reducible": self.reducible,
            "adjoint_reducible": self.adjoint_reducible,
            "adjoint_log": self.adjoint_log_coords.tolist(),
            "branch_rule": self.log.branch_rule,
            "max_drift": self.max_drift,
        }
        if self.log.center_factor is not None:
            record["center_factor"] = self.log.center_factor.matrix.tolist()
        return record


def classify_monodromy(m: GroupElement, tolerances: Tolerances = DEFAULT_TOLERANCES) -> MonodromyReport:
    """Classify a monodromy without integrating anything."""
    log = log_group(m, tolerance=tolerances.drift, window=tolerances.log_window)
    reducible = log.in_image
    # Ad(-I) is the identity, so SL2R monodromies are always reducible in the adjoint representation.
    adjoint_reducible = True if m.context.group_id == "SL2R" else reducible
    return MonodromyReport(m, log, reducible, adjoint_reducible, log.principal.coords.copy())


def monodromy(
    source: FundamentalSolution | PeriodicCurve, n_t: int = 256, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> MonodromyReport:
    """Classify ``alpha(T)`` of a solved system, integrating one period first if given a curve.

    Examples:
        >>> from floquet_lie import PeriodicCurve, get_context
        >>> ctx = get_context("SO3")
        >>> report = monodromy(PeriodicCurve.constant(ctx, [0.0, 0.0, 0.5]))
        >>> report.status.value
        'Unique'
    """
    if isinstance(source, FundamentalSolution):
        solution = source
    else:
        solution = solve_fundamental(source, n_t, tolerance=tolerances.drift)
    report = classify_monodromy(solution.monodromy(), tolerances)
    report.max_drift = solution.max_drift
    logger.info("monodromy status %s, principal log %s", report.status.value, report.log.principal.coords)
    return report


@dataclass
class BranchContinuation:
    """A log ``k(s_i)`` of every monodromy, continuous in ``s``."""

    context: LieContext
    s_grid: np.ndarray
    k: np.ndarray
    jumps: np.ndarray
    statuses: List[LogStatus]
    rule: str = "continued"

    def at(self, index: int) -> AlgebraElement:
        return AlgebraElement(self.context, self.k[index])


def continue_log_branch(
    monodromies: Sequence[GroupElement],
    s_grid: Sequence[float],
    k0: Optional[np.ndarray] = None,
    threshold: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> BranchContinuation:
    """Pick, for each ``s``, the log of ``m(s)`` nearest the previous choice.

    Args:
        monodromies: ``m(s_i)`` in grid order.
        s_grid: The matching ``s`` values.
        k0: Log chosen at ``s_0``; defaults to the candidate nearest zero.
        threshold: Largest accepted step ``|k(s_i) - k(s_{i-1})|``; defaults to
            ``tolerances.branch_jump``.

    Raises:
        UniformReducibilityViolated: If some ``m(s)`` is not an exponential.
        BranchAmbiguity: If the nearest candidate is too far or not unique.
    """
    threshold = tolerances.branch_jump if threshold is None else threshold
    if not monodromies:
        raise ValueError("Need at least one monodromy")
    ctx = monodromies[0].context
    prev = np.zeros(ctx.dim) if k0 is None else np.asarray(k0, dtype=float)
    ks: List[np.ndarray] = []
    jumps: List[float] = []
    statuses: List[LogStatus] = []
    for m, s in zip(monodromies, s_grid):
        log = log_group(m, tolerance=tolerances.drift, window=tolerances.log_window)
        if not log.in_image:
            raise UniformReducibilityViolated(float(s), trace=float(np.trace(m.matrix)))
        candidates = distinct_candidates(log.candidates(hint=prev))
        dists = np.array([np.linalg.norm(c - prev) for c in candidates])
        order = np.argsort(dists, kind="stable")
        best = float(dists[order[0]])
        if best > threshold:
            raise BranchAmbiguity(float(s), best, threshold)
        if len(order) > 1 and dists[order[1]] <= threshold:
            raise BranchAmbiguity(float(s), float(dists[order[1]]), threshold)
        prev = candidates[order[0]]
        ks.append(prev)
        jumps.append(best)
        statuses.append(log.status)
    logger.debug("continued log branch over %d nodes, max jump %.3e", len(ks), max(jumps))
    return BranchContinuation(ctx, np.asarray(s_grid, dtype=float), np.stack(ks), np.array(jumps), statuses)


def distinct_candidates(candidates: List[np.ndarray]) -> List[np.ndarray]:
    out: List[np.ndarray] = []
    for c in candidates:
        if all(np.linalg.norm(c - o) > _DUPLICATE * (1.0 + np.linalg.norm(o)) for o in out):
            out.append(c)
    return out


@dataclass
class FloquetFactorization:
    """``p(s_i, tau_j) = alpha(s_i, tau_j T(s_i)) exp(-tau_j k(s_i))``."""

    context: LieContext
    s_grid: np.ndarray
    tau: np.ndarray
    periods: np.ndarray
    k: np.ndarray
    p: np.ndarray
    periodicity_residuals: np.ndarray
    k_rule: str
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def periodicity_residual(self) -> float:
        return float(np.max(self.periodicity_residuals))

    def inverse_values(self) -> np.ndarray:
        return self.context.inverse(self.p)

    def reconstruct(self, index: int) -> np.ndarray:
        """Fundamental solution of row ``index`` rebuilt as ``p exp(tau k)``."""
        return self.p[index] @ self.context.exp(self.tau[:, None] * self.k[index])


def floquet_factor(
    family: FamilySolution,
    k: np.ndarray,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    k_rule: str = "continued",
) -> FloquetFactorization:
    """Factor every row of ``family`` against the logs ``k``.

    Raises:
        FactorizationError: If some ``p(s, T(s))`` misses the identity by more than
            ``tolerances.periodicity``.
    """
    ctx = family.context
    k = np.asarray(k, dtype=float)
    tau = family.tau
    alpha = family.values
    shifts = ctx.exp(-tau[None, :, None] * k[:, None, :])
    p = alpha @ shifts
    eye = ctx.identity()
    residuals = np.max(np.abs(p[:, -1] - eye), axis=(-2, -1))
    for s, res in zip(family.s_grid, residuals):
        if not res <= tolerances.periodicity:
            raise FactorizationError(float(s), float(res), tolerances.periodicity)
    logger.debug("floquet factor periodicity residual %.3e", float(np.max(residuals)))
    return FloquetFactorization(
        ctx,
        family.s_grid,
        tau,
        family.periods,
        k,
        p,
        residuals,
        k_rule,
        stats={"max_drift": family.max_drift},
    )


def dt_p_values(context: LieContext, p: np.ndarray, phi: np.ndarray, k: np.ndarray, period: float) -> np.ndarray:
    """``D_t p = phi - Ad_p k / T`` at each sample of ``p``."""
    return phi - context.adjoint_coords(p, np.broadcast_to(k, phi.shape)) / period


def phi_on_grid(factor: FloquetFactorization, homotopy: Homotopy) -> np.ndarray:
    """``phi(s_i, tau_j T(s_i))`` for every node of the factor grid."""
    return np.stack(
        [homotopy.curve_at(float(s))(factor.tau * period) for s, period in zip(factor.s_grid, factor.periods)]
    )


def analytic_dt_p(
    factor: FloquetFactorization, homotopy: Homotopy, s_idx: int, t_idx: int
) -> AlgebraElement:
    """``D_t p`` at one node without finite differencing in ``t``."""
    s = float(factor.s_grid[s_idx])
    period = float(factor.periods[s_idx])
    phi = homotopy.curve_at(s)(factor.tau[t_idx] * period)
    coords = dt_p_values(factor.context, factor.p[s_idx, t_idx], phi, factor.k[s_idx], period)
    return AlgebraElement(factor.context, coords)


def principal_log(report: MonodromyReport) -> np.ndarray:
    """Principal log of a reducible monodromy, used when no homotopy is continued."""
    if not report.reducible:
        raise UniformReducibilityViolated(1.0, trace=float(np.trace(report.monodromy.matrix)))
    return report.log.principal.coords.copy()


def coadjoint_monodromy_residual(m: GroupElement, k: np.ndarray) -> float:
    """Distance between the coadjoint period map ``Ad*_{m^-1}`` and ``exp(-ad*_k)``.

    Both act on the dual basis; a small value confirms ``k`` is a log of ``m`` as seen by
    the coadjoint Euler system as well.
    """
    ctx = m.context
    period_map = ctx.adjoint_matrix(ctx.inverse(m.matrix)).T
    generated = expm(-ctx.ad_matrix(np.asarray(k, dtype=float)).T)
    return float(np.max(np.abs(period_map - generated)))
