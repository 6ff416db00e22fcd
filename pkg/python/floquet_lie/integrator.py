"""Periodic curves in the algebra and the fundamental solution of ``D_t alpha = phi``.

``D_t alpha`` is the right-logarithmic derivative ``alpha' alpha^-1``, so the fundamental
solution satisfies ``alpha' = phi(t) alpha`` with ``alpha(0) = I`` and is advanced by a
fourth-order Runge-Kutta-Munthe-Kaas step that stays on the group up to round-off.
"""

from __future__ import annotations

import abc
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, CurveSpec
from .errors import BoundaryError, DriftError, ResolutionError
from .lie_core import AlgebraElement, GroupElement, LieContext

__all__ = [
    "PeriodicCurve",
    "FundamentalSolution",
    "evaluate_curve",
    "step",
    "FamilySolution",
    "Homotopy",
    "LinearHomotopy",
    "SampledHomotopy",
    "solve_fundamental",
    "solve_family",
    "d_operator",
    "d_operator_grid",
    "grid_derivative",
]

logger = logging.getLogger(__name__)

CurveKind = Literal["fourier", "piecewise"]
DerivativeMode = Literal["periodic", "one_sided"]


@dataclass(frozen=True, eq=False)
class PeriodicCurve:
    """A ``T``-periodic curve in the algebra, given by coordinates.

    Fourier curves store ``coefficients[i, n] = (a_n, b_n)`` for coordinate ``i`` and
    harmonic ``n`` at angular frequency ``2 pi n / T``. Piecewise-constant curves store
    ``breakpoints`` (``0 = t_0 < ... < t_M = T``) and one coordinate row per segment.
    """

    context: LieContext
    period: float
    kind: CurveKind
    coefficients: Optional[np.ndarray] = None
    breakpoints: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"Period must be positive, got {self.period}")
        if self.kind == "fourier":
            coeffs = np.asarray(self.coefficients, dtype=float)
            if coeffs.ndim != 3 or coeffs.shape[0] != self.context.dim or coeffs.shape[2] != 2:
                raise ValueError(f"Fourier coefficients must have shape (3, H+1, 2), got {coeffs.shape}")
            object.__setattr__(self, "coefficients", coeffs)
        else:
            breaks = np.asarray(self.breakpoints, dtype=float)
            values = np.asarray(self.values, dtype=float).reshape(-1, self.context.dim)
            if len(breaks) != len(values) + 1 or np.any(np.diff(breaks) <= 0):
                raise ValueError("Breakpoints must increase and bracket every segment")
            object.__setattr__(self, "breakpoints", breaks)
            object.__setattr__(self, "values", values)

    @classmethod
    def fourier(cls, context: LieContext, coefficients: np.ndarray, period: float = 2 * math.pi) -> "PeriodicCurve":
        return cls(context, float(period), "fourier", coefficients=coefficients)

    @classmethod
    def piecewise(
        cls, context: LieContext, breakpoints: Sequence[float], values: np.ndarray, period: float | None = None
    ) -> "PeriodicCurve":
        period = float(breakpoints[-1]) if period is None else float(period)
        return cls(context, period, "piecewise", breakpoints=breakpoints, values=values)

    @classmethod
    def constant(cls, context: LieContext, coords: Sequence[float], period: float = 2 * math.pi) -> "PeriodicCurve":
        coeffs = np.zeros((context.dim, 1, 2))
        coeffs[:, 0, 0] = np.asarray(coords, dtype=float)
        return cls.fourier(context, coeffs, period)

    @classmethod
    def zero(cls, context: LieContext, period: float = 2 * math.pi) -> "PeriodicCurve":
        return cls.constant(context, np.zeros(context.dim), period)

    @classmethod
    def from_samples(cls, context: LieContext, samples: np.ndarray, period: float) -> "PeriodicCurve":
        """Trigonometric interpolant through ``samples[j] = phi(j T / N)``."""
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        spectrum = np.fft.rfft(samples, axis=0) / n
        coeffs = np.zeros((context.dim, spectrum.shape[0], 2))
        coeffs[:, :, 0] = 2.0 * spectrum.real.T
        coeffs[:, :, 1] = -2.0 * spectrum.imag.T
        coeffs[:, 0, :] = [[c, 0.0] for c in spectrum[0].real]
        if n % 2 == 0:
            coeffs[:, -1, 0] = spectrum[-1].real
            coeffs[:, -1, 1] = 0.0
        return cls.fourier(context, coeffs, period)

    @classmethod
    def from_config(cls, context: LieContext, spec: CurveSpec) -> "PeriodicCurve":
        if spec.fourier is not None:
            harmonics = max(len(series) for series in spec.fourier.coefficients)
            coeffs = np.zeros((context.dim, harmonics, 2))
            for i, series in enumerate(spec.fourier.coefficients):
                coeffs[i, : len(series)] = np.asarray(series, dtype=float)
            return cls.fourier(context, coeffs, spec.fourier.period)
        segments = spec.piecewise.segments
        breaks = [seg.t_start for seg in segments] + [segments[-1].t_end]
        values = np.array([seg.coords for seg in segments], dtype=float)
        return cls.piecewise(context, breaks, values, spec.piecewise.period)

    def scaled(self, factor: float) -> "PeriodicCurve":
        if self.kind == "fourier":
            return PeriodicCurve.fourier(self.context, factor * self.coefficients, self.period)
        return PeriodicCurve.piecewise(self.context, self.breakpoints, factor * self.values, self.period)

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        """Coordinates at ``t`` (any shape); the result has a trailing axis of length 3."""
        t = np.mod(np.asarray(t, dtype=float), self.period)
        if self.kind == "fourier":
            harmonics = np.arange(self.coefficients.shape[1])
            angles = (2 * math.pi / self.period) * t[..., None] * harmonics
            return np.cos(angles) @ self.coefficients[:, :, 0].T + np.sin(angles) @ self.coefficients[:, :, 1].T
        index = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, len(self.values) - 1)
        return self.values[index]

    def at(self, t: float) -> AlgebraElement:
        return AlgebraElement(self.context, self(t))

    def samples(self, n_t: int) -> np.ndarray:
        """Values on the uniform grid ``t_j = j T / n_t``, ``j = 0..n_t-1``."""
        return self(np.arange(n_t) * (self.period / n_t))


@dataclass
class FundamentalSolution:
    """Samples of ``alpha`` on ``t_j = j h`` for ``j = 0..n_t * periods``."""

    context: LieContext
    period: float
    n_t: int
    periods: int
    times: np.ndarray
    values: np.ndarray
    step_stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def step(self) -> float:
        return self.period / self.n_t

    def monodromy(self) -> GroupElement:
        return GroupElement(self.context, self.values[self.n_t])

    def at(self, index: int) -> GroupElement:
        return GroupElement(self.context, self.values[index])

    @property
    def max_drift(self) -> float:
        return float(self.step_stats.get("max_drift", 0.0))


def _dexpinv(context: LieContext, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    uv = context.bracket_coords(u, v)
    return v - 0.5 * uv + context.bracket_coords(u, uv) / 12.0


def _rkmk_increment(context: LieContext, a0: np.ndarray, a_half: np.ndarray, a1: np.ndarray, h: float) -> np.ndarray:
    k1 = h * a0
    k2 = h * _dexpinv(context, 0.5 * k1, a_half)
    k3 = h * _dexpinv(context, 0.5 * k2, a_half)
    k4 = h * _dexpinv(context, k3, a1)
    return (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def evaluate_curve(curve: PeriodicCurve, t: float) -> AlgebraElement:
    return curve.at(t)


def step(g: GroupElement, curve: PeriodicCurve, t: float, h: float) -> GroupElement:
    """Advance ``g`` from ``t`` to ``t + h`` with one RKMK4 step (exact for piecewise curves)."""
    if not h > 0:
        raise ValueError(f"Step must be positive, got {h}")
    ctx = curve.context
    if curve.kind == "piecewise":
        return GroupElement(ctx, _piecewise_flow(curve, t, t + h) @ g.matrix)
    a0, a_half, a1 = curve(np.array([t, t + 0.5 * h, t + h]))
    return GroupElement(ctx, ctx.exp(_rkmk_increment(ctx, a0, a_half, a1, h)) @ g.matrix)


def _piecewise_flow(curve: PeriodicCurve, t0: float, t1: float) -> np.ndarray:
    """Exact flow of a piecewise-constant curve over ``[t0, t1]``."""
    ctx = curve.context
    result = ctx.identity()
    period = curve.period
    cycle = math.floor(t0 / period)
    local = t0 - cycle * period
    remaining = t1 - t0
    while remaining > 0:
        idx = int(np.clip(np.searchsorted(curve.breakpoints, local, side="right") - 1, 0, len(curve.values) - 1))
        dt = min(remaining, curve.breakpoints[idx + 1] - local)
        result = ctx.exp(curve.values[idx] * dt) @ result
        remaining -= dt
        local += dt
        if local >= period - 1e-15 * period:
            local = 0.0
    return result


def solve_fundamental(
    curve: PeriodicCurve,
    n_t: int,
    periods: int = 1,
    tolerance: float | None = None,
) -> FundamentalSolution:
    """Integrate ``alpha' = phi(t) alpha`` from ``alpha(0) = I`` over ``periods`` periods.

    Args:
        curve: The periodic curve ``phi``.
        n_t: Steps per period; must be even and at least 8.
        periods: Number of periods to integrate.
        tolerance: Bound on the manifold residual at every node.

    Returns:
        The sampled fundamental solution including the endpoint.

    Raises:
        ValueError: If ``n_t`` is odd or smaller than 8.
        DriftError: If any node leaves the group by more than ``tolerance``.
    """
    if n_t < 8 or n_t % 2:
        raise ValueError(f"N_t must be even and >= 8, got {n_t}")
    if periods < 1:
        raise ValueError(f"periods must be >= 1, got {periods}")
    tolerance = DEFAULT_TOLERANCES.drift if tolerance is None else tolerance
    ctx = curve.context
    h = curve.period / n_t
    total = n_t * periods
    times = np.arange(total + 1) * h
    values = np.empty((total + 1, ctx.matrix_size, ctx.matrix_size))
    values[0] = ctx.identity()
    max_drift = 0.0
    max_increment = 0.0

    if curve.kind == "fourier":
        half = curve(np.arange(2 * total + 1) * (h / 2))
    for j in range(total):
        if curve.kind == "fourier":
            increment = _rkmk_increment(ctx, half[2 * j], half[2 * j + 1], half[2 * j + 2], h)
            max_increment = max(max_increment, float(np.linalg.norm(increment)))
            values[j + 1] = ctx.exp(increment) @ values[j]
        else:
            values[j + 1] = _piecewise_flow(curve, times[j], times[j + 1]) @ values[j]
        drift = float(ctx.manifold_residual(values[j + 1]))
        max_drift = max(max_drift, drift)
        if not drift <= tolerance:
            raise DriftError(float(times[j + 1]), drift, tolerance)

    stats = {"steps": total, "step": h, "max_drift": max_drift, "max_increment": max_increment}
    logger.debug("fundamental solution: %s", stats)
    return FundamentalSolution(ctx, curve.period, n_t, periods, times, values, stats)


class Homotopy(abc.ABC):
    """A one-parameter family ``phi(s, .)`` for ``s`` in ``[0, 1]``.

    ``base_log`` is the log of the monodromy chosen at ``s = 0``; ``None`` means the
    zero log of the identity.
    """

    kind: str = "custom"
    base_log: Optional[np.ndarray] = None
    fixed_grid: Optional[np.ndarray] = None

    def __init__(self, context: LieContext):
        self.context = context

    @abc.abstractmethod
    def curve_at(self, s: float) -> PeriodicCurve: ...

    def s_grid(self, n_s: int) -> np.ndarray:
        if self.fixed_grid is not None:
            if len(self.fixed_grid) != n_s + 1:
                raise ResolutionError(
                    f"This homotopy is sampled on {len(self.fixed_grid) - 1} s-intervals, not {n_s}"
                )
            return self.fixed_grid
        return np.linspace(0.0, 1.0, n_s + 1)


class LinearHomotopy(Homotopy):
    """``phi(s, t) = s phi(t)``; the zero curve at ``s = 0``."""

    kind = "linear"

    def __init__(self, curve: PeriodicCurve):
        super().__init__(curve.context)
        self.curve = curve

    def curve_at(self, s: float) -> PeriodicCurve:
        return self.curve.scaled(s)


class SampledHomotopy(Homotopy):
    """A homotopy known only on a fixed s-grid."""

    def __init__(
        self,
        context: LieContext,
        s_values: Sequence[float],
        curves: Sequence[PeriodicCurve],
        kind: str = "sampled",
        base_log: Optional[np.ndarray] = None,
    ):
        super().__init__(context)
        if len(s_values) != len(curves):
            raise ValueError("Need one curve per s value")
        self.fixed_grid = np.asarray(s_values, dtype=float)
        self.curves: List[PeriodicCurve] = list(curves)
        self.kind = kind
        self.base_log = None if base_log is None else np.asarray(base_log, dtype=float)

    def curve_at(self, s: float) -> PeriodicCurve:
        idx = int(np.argmin(np.abs(self.fixed_grid - s)))
        if not math.isclose(self.fixed_grid[idx], s, abs_tol=1e-12):
            raise ValueError(f"s={s} is not on the sampled grid")
        return self.curves[idx]


@dataclass
class FamilySolution:
    """Fundamental solutions for every row of a homotopy, on normalized time ``tau = t / T(s)``."""

    context: LieContext
    s_grid: np.ndarray
    periods: np.ndarray
    n_t: int
    rows: List[FundamentalSolution]

    @property
    def values(self) -> np.ndarray:
        return np.stack([row.values[: self.n_t + 1] for row in self.rows])

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_t + 1)

    def monodromies(self) -> List[GroupElement]:
        return [row.monodromy() for row in self.rows]

    @property
    def max_drift(self) -> float:
        return max(row.max_drift for row in self.rows)


def solve_family(
    homotopy: Homotopy,
    n_s: int,
    n_t: int,
    tolerance: float | None = None,
    threads: int = 1,
) -> FamilySolution:
    """Solve every row ``s_i = i / n_s`` of ``homotopy``.

    Rows are independent; with ``threads > 1`` they run on a thread pool, and results are
    gathered in row order so the output does not depend on the worker count.

    Raises:
        DriftError: Re-raised with the offending ``s`` attached.
    """
    s_grid = homotopy.s_grid(n_s)
    curves = [homotopy.curve_at(float(s)) for s in s_grid]

    def _row(index: int) -> FundamentalSolution:
        try:
            return solve_fundamental(curves[index], n_t, tolerance=tolerance)
        except DriftError as exc:
            raise exc.tagged(float(s_grid[index])) from exc

    indices = range(len(s_grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_row, indices))
    else:
        rows = [_row(i) for i in indices]
    logger.info("solved %d rows with N_t=%d on %d thread(s)", len(rows), n_t, max(threads, 1))
    return FamilySolution(
        homotopy.context,
        s_grid,
        np.array([c.period for c in curves]),
        n_t,
        rows,
    )


_CENTERED = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_EDGE = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_NEAR_EDGE = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def grid_derivative(values: np.ndarray, h: float, axis: int = 0, mode: DerivativeMode = "one_sided") -> np.ndarray:
    """Fourth-order finite-difference derivative along ``axis``.

    In ``periodic`` mode the samples cover one period without repeating the endpoint.
    In ``one_sided`` mode the two points at each end use one-sided five-point stencils.
    """
    data = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = data.shape[0]
    if n < 5:
        raise ResolutionError(f"Need at least 5 samples for a fourth-order derivative, got {n}")
    if mode == "periodic":
        out = sum(w * np.roll(data, -offset, axis=0) for w, offset in zip(_CENTERED, range(-2, 3)))
    else:
        out = np.empty_like(data)
        out[2:-2] = sum(w * data[2 + offset : n - 2 + offset] for w, offset in zip(_CENTERED, range(-2, 3)))
        out[0] = np.tensordot(_EDGE, data[:5], axes=1)
        out[1] = np.tensordot(_NEAR_EDGE, data[:5], axes=1)
        out[-1] = -np.tensordot(_EDGE, data[::-1][:5], axes=1)
        out[-2] = -np.tensordot(_NEAR_EDGE, data[::-1][:5], axes=1)
    return np.moveaxis(out / h, 0, axis)


def d_operator_grid(
    context: LieContext, samples: np.ndarray, h: float, axis: int = 0, mode: DerivativeMode = "one_sided"
) -> np.ndarray:
    """``D alpha = (d alpha) alpha^-1`` at every node along ``axis``, as coordinates."""
    derivative = grid_derivative(samples, h, axis=axis, mode=mode)
    return context.vee(derivative @ context.inverse(samples))


def d_operator(
    context: LieContext, samples: np.ndarray, index: int, h: float, periodic: bool = False
) -> AlgebraElement:
    """Centered fourth-order ``D alpha`` at a single grid index.

    Raises:
        BoundaryError: When the stencil leaves a non-periodic grid.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if periodic:
        picks = [samples[(index + offset) % n] for offset in range(-2, 3)]
    else:
        if index < 2 or index > n - 3:
            raise BoundaryError(f"Index {index} needs a one-sided stencil on a grid of {n} points")
        picks = [samples[index + offset] for offset in range(-2, 3)]
    derivative = sum(w * p for w, p in zip(_CENTERED, picks)) / h
    return AlgebraElement(context, context.vee(derivative @ context.inverse(samples[index % n])))
