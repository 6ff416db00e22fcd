"""Matrix Lie group kernels for SO(3) and SL(2, R).

Both algebras are three dimensional. Elements are stored by their coordinates in a
fixed basis:

- ``SO3``: the hat-map basis, ``[e_i, e_j] = eps_ijk e_k``.
- ``SL2R``: the basis in which a traceless matrix ``[[a1, a2], [a3, -a1]]`` has
  coordinates ``w = (2 a1, -a2 - a3, a2 - a3)``; brackets then read
  ``[x, y] = diag(1, 1, -1) (x cross y)``.

The duality pairing between the algebra and its dual is the coordinate dot product in
that basis, so ``ad*_x`` is the transpose of the ``ad_x`` matrix.

The array kernels on :class:`LieContext` accept stacks (leading batch axes) so grid code
can stay vectorized; the module-level operations act on single elements.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from .config import DEFAULT_TOLERANCES, GroupId
from .errors import ContextError, InvalidGroupElement

__all__ = [
    "LieContext",
    "AlgebraElement",
    "GroupElement",
    "CoalgebraElement",
    "LogStatus",
    "LogResult",
    "get_context",
    "series_exp",
    "bracket",
    "exp_group",
    "log_group",
    "adjoint",
    "ad_star",
    "coadjoint",
    "pairing",
    "kirillov",
]

TWO_PI = 2.0 * math.pi

# Flipped only by the selftest mutation canary.
_ad_star_sign: float = 1.0


def series_exp(mats: np.ndarray, terms: int = 30) -> np.ndarray:
    """Scaled-and-squared truncated power series of the matrix exponential.

    Works on a single matrix or a stack. Used near closed-form singularities and as an
    independent oracle.
    """
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    norm = float(np.max(np.abs(mats).sum(axis=-1), initial=0.0))
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = mats / (2.0**squarings)
    eye = np.broadcast_to(np.eye(n), mats.shape)
    result = eye.copy()
    term = eye.copy()
    for k in range(1, terms + 1):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def _theta_over_sin_series(eps: np.ndarray | float) -> np.ndarray | float:
    """``lam / sinh(lam)`` (or ``theta / sin(theta)``) as a function of ``cosh(lam) - 1``."""
    total = 0.0
    coeff = 1.0
    for k in range(7):
        if k > 0:
            coeff *= k / (k + 0.5)
        total = total + coeff * (-np.asarray(eps) / 2.0) ** k
    return total


@dataclass(frozen=True, eq=False)
class LieContext:
    """A supported group together with its fixed algebra basis."""

    group_id: GroupId
    basis: np.ndarray
    structure_constants: np.ndarray = field(repr=False)
    invariant_metric: np.ndarray = field(repr=False)
    _projector: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def matrix_size(self) -> int:
        return self.basis.shape[-1]

    def identity(self) -> np.ndarray:
        return np.eye(self.matrix_size)

    def hat(self, coords: np.ndarray) -> np.ndarray:
        return np.einsum("...i,ijk->...jk", np.asarray(coords, dtype=float), self.basis)

    def vee(self, mats: np.ndarray) -> np.ndarray:
        """Least-squares projection of matrices onto the algebra basis."""
        mats = np.asarray(mats, dtype=float)
        n = self.matrix_size
        flat = mats.reshape(mats.shape[:-2] + (n * n,))
        return flat @ self._projector

    def bracket_coords(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("...i,...j,ijk->...k", x, y, self.structure_constants)

    def ad_matrix(self, x: np.ndarray) -> np.ndarray:
        """``ad_x`` as a matrix acting on coordinates, ``(ad_x)[k, j] = sum_i x_i c[i, j, k]``."""
        return np.einsum("...i,ijk->...kj", np.asarray(x, dtype=float), self.structure_constants)

    def inverse(self, mats: np.ndarray) -> np.ndarray:
        mats = np.asarray(mats, dtype=float)
        if self.group_id == "SO3":
            return np.swapaxes(mats, -1, -2)
        inv = np.empty_like(mats)
        inv[..., 0, 0] = mats[..., 1, 1]
        inv[..., 1, 1] = mats[..., 0, 0]
        inv[..., 0, 1] = -mats[..., 0, 1]
        inv[..., 1, 0] = -mats[..., 1, 0]
        return inv / np.linalg.det(mats)[..., None, None]

    def adjoint_matrix(self, mats: np.ndarray) -> np.ndarray:
        """``Ad_g`` as a 3x3 matrix on coordinates; columns are images of basis elements."""
        mats = np.asarray(mats, dtype=float)
        inv = self.inverse(mats)
        conj = mats[..., None, :, :] @ self.basis @ inv[..., None, :, :]
        return np.swapaxes(self.vee(conj), -1, -2)

    def adjoint_coords(self, mats: np.ndarray, x: np.ndarray) -> np.ndarray:
        """``Ad_g x`` for stacks of group matrices and coordinates."""
        conj = mats @ self.hat(x) @ self.inverse(mats)
        return self.vee(conj)

    def manifold_residual(self, mats: np.ndarray) -> np.ndarray:
        mats = np.asarray(mats, dtype=float)
        det_err = np.abs(np.linalg.det(mats) - 1.0)
        if self.group_id == "SL2R":
            return det_err
        gram = np.swapaxes(mats, -1, -2) @ mats - np.eye(3)
        return np.maximum(np.linalg.norm(gram, axis=(-2, -1)), det_err)

    def exp(self, coords: np.ndarray, window: float | None = None) -> np.ndarray:
        """Closed-form exponential of (a stack of) coordinate vectors."""
        window = DEFAULT_TOLERANCES.log_window if window is None else window
        coords = np.asarray(coords, dtype=float)
        mats = self.hat(coords)
        eye = np.broadcast_to(self.identity(), mats.shape)
        if self.group_id == "SO3":
            theta = np.linalg.norm(coords, axis=-1)
            near = theta < window
            safe = np.where(near, 1.0, theta)
            a = np.sin(safe) / safe
            b = (1.0 - np.cos(safe)) / safe**2
            out = eye + a[..., None, None] * mats + b[..., None, None] * (mats @ mats)
        else:
            delta = (coords @ self.invariant_metric * coords).sum(axis=-1) / 4.0
            root = np.sqrt(np.abs(delta))
            near = root < window
            safe = np.where(near, 1.0, root)
            c = np.where(delta > 0, np.cosh(safe), np.cos(safe))
            s = np.where(delta > 0, np.sinh(safe), np.sin(safe)) / safe
            out = c[..., None, None] * eye + s[..., None, None] * mats
        if np.any(near):
            out = np.array(out, copy=True)
            out[near] = series_exp(mats[near])
        return out

    def log(self, mat: np.ndarray, window: float | None = None) -> "LogResult":
        window = DEFAULT_TOLERANCES.log_window if window is None else window
        if self.group_id == "SO3":
            return _log_so3(self, mat, window)
        return _log_sl2r(self, mat, window)


def _build_context(group_id: GroupId) -> LieContext:
    if group_id == "SO3":
        basis = np.zeros((3, 3, 3))
        for i, (j, k) in enumerate([(2, 1), (0, 2), (1, 0)]):
            basis[i, j, k] = 1.0
            basis[i, k, j] = -1.0
        metric = np.eye(3)
    elif group_id == "SL2R":
        basis = 0.5 * np.array(
            [
                [[1.0, 0.0], [0.0, -1.0]],
                [[0.0, -1.0], [-1.0, 0.0]],
                [[0.0, 1.0], [-1.0, 0.0]],
            ]
        )
        metric = np.diag([1.0, 1.0, -1.0])
    else:
        raise ValueError(f"Unknown group: {group_id}")
    n = basis.shape[-1]
    projector = np.linalg.pinv(basis.reshape(3, n * n))
    commutators = np.einsum("iab,jbc->ijac", basis, basis) - np.einsum("jab,ibc->ijac", basis, basis)
    structure = commutators.reshape(3, 3, n * n) @ projector
    return LieContext(
        group_id=group_id,
        basis=basis,
        structure_constants=structure,
        invariant_metric=metric,
        _projector=projector,
    )


@functools.lru_cache(maxsize=None)
def get_context(group_id: GroupId) -> LieContext:
    """Return the shared context for ``"SO3"`` or ``"SL2R"``."""
    return _build_context(group_id)


def _same_context(*contexts: LieContext) -> LieContext:
    first = contexts[0]
    for other in contexts[1:]:
        if other.group_id != first.group_id:
            raise ContextError(f"Context mismatch: {first.group_id} vs {other.group_id}")
    return first


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    context: LieContext
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(self.context.dim)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def zero(cls, context: LieContext) -> "AlgebraElement":
        return cls(context, np.zeros(context.dim))

    @classmethod
    def basis_element(cls, context: LieContext, index: int) -> "AlgebraElement":
        return cls(context, np.eye(context.dim)[index])

    @classmethod
    def from_matrix(cls, context: LieContext, matrix: np.ndarray) -> "AlgebraElement":
        return cls(context, context.vee(matrix))

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.context.hat(self.coords)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(_same_context(self.context, other.context), self.coords + other.coords)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(_same_context(self.context, other.context), self.coords - other.coords)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.context, -self.coords)

    def __mul__(self, scalar: float) -> "AlgebraElement":
        return AlgebraElement(self.context, float(scalar) * self.coords)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"AlgebraElement({self.context.group_id}, {np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class GroupElement:
    context: LieContext
    matrix: np.ndarray

    def __post_init__(self):
        n = self.context.matrix_size
        matrix = np.array(self.matrix, dtype=float).reshape(n, n)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls, context: LieContext) -> "GroupElement":
        return cls(context, context.identity())

    def inverse(self) -> "GroupElement":
        return GroupElement(self.context, self.context.inverse(self.matrix))

    def residual(self) -> float:
        return float(self.context.manifold_residual(self.matrix))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(_same_context(self.context, other.context), self.matrix @ other.matrix)

    def __repr__(self) -> str:
        return f"GroupElement({self.context.group_id}, {np.array2string(self.matrix, precision=6)})"


@dataclass(frozen=True, eq=False)
class CoalgebraElement:
    context: LieContext
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(self.context.dim)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def zero(cls, context: LieContext) -> "CoalgebraElement":
        return cls(context, np.zeros(context.dim))

    @classmethod
    def dual_basis_element(cls, context: LieContext, index: int) -> "CoalgebraElement":
        return cls(context, np.eye(context.dim)[index])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def casimir(self) -> float:
        """Value of the invariant quadratic function on the dual."""
        return float(self.coords @ self.context.invariant_metric @ self.coords)

    def __add__(self, other: "CoalgebraElement") -> "CoalgebraElement":
        return CoalgebraElement(_same_context(self.context, other.context), self.coords + other.coords)

    def __sub__(self, other: "CoalgebraElement") -> "CoalgebraElement":
        return CoalgebraElement(_same_context(self.context, other.context), self.coords - other.coords)

    def __mul__(self, scalar: float) -> "CoalgebraElement":
        return CoalgebraElement(self.context, float(scalar) * self.coords)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"CoalgebraElement({self.context.group_id}, {np.array2string(self.coords, precision=6)})"


class LogStatus(str, enum.Enum):
    UNIQUE = "Unique"
    BRANCH_FAMILY = "BranchFamily"
    NOT_IN_IMAGE = "NotInImage"
    CENTER_TIMES_EXP = "CenterTimesExp"


@dataclass(frozen=True, eq=False)
class LogResult:
    """Classified logarithm of a group element.

    ``NotInImage`` results still carry ``principal`` and ``center_factor`` such that
    ``center_factor @ exp(principal)`` reproduces the input.

    ``angle`` and ``generator`` describe the one-parameter family of alternate branches:
    ``generator * (angle + 2 pi n)`` (SO3 axis, or SL2R elliptic generator with
    ``u^2 = -I``).
    """

    status: LogStatus
    principal: AlgebraElement
    center_factor: Optional[GroupElement] = None
    branch_rule: str = "unique"
    angle: Optional[float] = None
    generator: Optional[np.ndarray] = None
    near_identity: bool = False
    window: float = DEFAULT_TOLERANCES.log_window

    @property
    def in_image(self) -> bool:
        return self.status in (LogStatus.UNIQUE, LogStatus.BRANCH_FAMILY)

    def candidates(self, hint: Optional[np.ndarray] = None, n_max: int = 2) -> List[np.ndarray]:
        """Enumerate log branches near the principal one.

        ``hint`` is the previously continued log; it supplies the rotation direction when
        the element sits too close to the identity (or to ``-I``) to carry its own.
        """
        if not self.in_image:
            return []
        ctx = self.principal.context
        shifts = range(-n_max, n_max + 1)
        hint_dir = _hint_generator(ctx, hint, self.window) if hint is not None else None
        if self.branch_rule == "minus_identity" and hint_dir is not None:
            return [hint_dir * (math.pi + TWO_PI * n) for n in shifts]
        out: List[np.ndarray] = [self.principal.coords]
        unreliable = self.generator is None or (self.angle or 0.0) < _RELIABLE_ANGLE
        if self.near_identity and unreliable:
            if hint_dir is not None:
                out.extend(self.principal.coords + TWO_PI * n * hint_dir for n in shifts if n != 0)
            return out
        if self.angle is not None and self.generator is not None:
            out.extend(self.generator * (self.angle + TWO_PI * n) for n in shifts if n != 0)
        return out


# below this rotation angle the axis read off a near-identity element is noise dominated
_RELIABLE_ANGLE = 1e-6

# ||g + I|| at or below this is -I up to round-off
_MINUS_IDENTITY_ROUND_OFF = 1e-14


def _hint_generator(ctx: LieContext, hint: np.ndarray, window: float) -> Optional[np.ndarray]:
    """Unit rotation generator along ``hint`` or ``None`` when it has no rotation part."""
    hint = np.asarray(hint, dtype=float)
    if ctx.group_id == "SO3":
        norm = float(np.linalg.norm(hint))
        return hint / norm if norm > window else None
    # traceless K: K^2 = -det(K) I, elliptic iff det K > 0
    det = -float(hint @ ctx.invariant_metric @ hint) / 4.0
    if det <= window**2:
        return None
    return hint / math.sqrt(det)


def _log_so3(ctx: LieContext, mat: np.ndarray, window: float) -> LogResult:
    skew = ctx.vee(0.5 * (mat - mat.T))
    sin_theta = float(np.linalg.norm(skew))
    cos_theta = 0.5 * (float(np.trace(mat)) - 1.0)
    theta = math.atan2(sin_theta, cos_theta)
    if theta < window:
        coords = skew * (1.0 + theta**2 / 6.0 + 7.0 * theta**4 / 360.0)
        axis = skew / sin_theta if sin_theta > 0 else None
        return LogResult(
            LogStatus.UNIQUE,
            AlgebraElement(ctx, coords),
            branch_rule="axis*(theta+2*pi*n)",
            angle=theta,
            generator=axis,
            near_identity=True,
            window=window,
        )
    if math.pi - theta < window:
        sym = 0.5 * (mat + mat.T) - cos_theta * np.eye(3)
        j = int(np.argmax(np.diag(sym)))
        axis = sym[:, j] / math.sqrt(sym[j, j] * (1.0 - cos_theta))
        if axis @ skew < 0:
            axis = -axis
        return LogResult(
            LogStatus.BRANCH_FAMILY,
            AlgebraElement(ctx, theta * axis),
            branch_rule="axis*(theta+2*pi*n), both axis signs at theta=pi",
            angle=theta,
            generator=axis,
            window=window,
        )
    axis = skew / sin_theta
    return LogResult(
        LogStatus.UNIQUE,
        AlgebraElement(ctx, theta * axis),
        branch_rule="axis*(theta+2*pi*n)",
        angle=theta,
        generator=axis,
        window=window,
    )


def _log_sl2r_in_image(ctx: LieContext, mat: np.ndarray, window: float) -> LogResult:
    half_trace = 0.5 * float(np.trace(mat))
    eps = half_trace - 1.0
    traceless = mat - half_trace * np.eye(2)
    if abs(eps) < window:
        coords = ctx.vee(_theta_over_sin_series(eps) * traceless)
        angle = generator = None
        det = -float(coords @ ctx.invariant_metric @ coords) / 4.0
        if eps < 0 and det > 0:
            angle = math.sqrt(det)
            generator = coords / angle
        return LogResult(
            LogStatus.UNIQUE,
            AlgebraElement(ctx, coords),
            branch_rule="near identity",
            angle=angle,
            generator=generator,
            near_identity=True,
            window=window,
        )
    if half_trace > 1.0:
        lam = math.acosh(half_trace)
        coords = ctx.vee(lam / math.sinh(lam) * traceless)
        return LogResult(LogStatus.UNIQUE, AlgebraElement(ctx, coords), branch_rule="hyperbolic", window=window)
    # traceless part is sin(theta) * u with det(u) = 1
    sin_sq = _traceless_det(traceless)
    if sin_sq <= 0.0:
        sin_sq = 1.0 - half_trace**2
    sin_theta = math.sqrt(sin_sq)
    theta = math.atan2(sin_theta, half_trace)
    generator = ctx.vee(traceless / sin_theta)
    return LogResult(
        LogStatus.BRANCH_FAMILY,
        AlgebraElement(ctx, theta * generator),
        branch_rule="elliptic: generator*(theta+2*pi*n)",
        angle=theta,
        generator=generator,
        window=window,
    )


def _traceless_det(traceless: np.ndarray) -> float:
    return -float(traceless[0, 0] ** 2) - float(traceless[0, 1] * traceless[1, 0])


def _log_sl2r(ctx: LieContext, mat: np.ndarray, window: float) -> LogResult:
    trace = float(np.trace(mat))
    if np.linalg.norm(mat + np.eye(2)) <= _MINUS_IDENTITY_ROUND_OFF:
        rotation = np.array([0.0, 0.0, 2.0])
        return LogResult(
            LogStatus.BRANCH_FAMILY,
            AlgebraElement(ctx, math.pi * rotation),
            branch_rule="minus_identity",
            angle=math.pi,
            generator=rotation,
            window=window,
        )
    if trace > -2.0:
        return _log_sl2r_in_image(ctx, mat, window)
    inner = _log_sl2r_in_image(ctx, -mat, window)
    return LogResult(
        LogStatus.NOT_IN_IMAGE,
        inner.principal,
        center_factor=GroupElement(ctx, -np.eye(2)),
        branch_rule="center_times_exp",
        window=window,
    )


def bracket(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Lie bracket ``[x, y] = xy - yx``."""
    ctx = _same_context(x.context, y.context)
    return AlgebraElement(ctx, ctx.bracket_coords(x.coords, y.coords))


def exp_group(x: AlgebraElement, window: float | None = None) -> GroupElement:
    """Closed-form exponential (Rodrigues for SO3, trace-based for SL2R)."""
    return GroupElement(x.context, x.context.exp(x.coords, window=window))


def log_group(g: GroupElement, tolerance: float | None = None, window: float | None = None) -> LogResult:
    """Logarithm with branch classification.

    Raises:
        InvalidGroupElement: When ``g`` is off the group manifold by more than ``tolerance``.
    """
    tolerance = DEFAULT_TOLERANCES.drift if tolerance is None else tolerance
    residual = g.residual()
    if not residual <= tolerance:
        raise InvalidGroupElement(
            f"Manifold residual {residual:.3e} exceeds {tolerance:.1e}", residual=residual
        )
    return g.context.log(g.matrix, window=window)


def adjoint(g: GroupElement, x: AlgebraElement) -> AlgebraElement:
    """``Ad_g x = g x g^-1``."""
    ctx = _same_context(g.context, x.context)
    return AlgebraElement(ctx, ctx.adjoint_coords(g.matrix, x.coords))


def ad_star(x: AlgebraElement, mu: CoalgebraElement) -> CoalgebraElement:
    """``ad*_x mu`` defined by ``<ad*_x mu, y> = <mu, [x, y]>``."""
    ctx = _same_context(x.context, mu.context)
    return CoalgebraElement(ctx, _ad_star_sign * (ctx.ad_matrix(x.coords).T @ mu.coords))


def coadjoint(g: GroupElement, mu: CoalgebraElement) -> CoalgebraElement:
    """Left coadjoint action ``Ad*_{g^-1} mu``."""
    ctx = _same_context(g.context, mu.context)
    ad_inv = ctx.adjoint_matrix(ctx.inverse(g.matrix))
    return CoalgebraElement(ctx, ad_inv.T @ mu.coords)


def pairing(mu: CoalgebraElement, x: AlgebraElement) -> float:
    _same_context(mu.context, x.context)
    return float(mu.coords @ x.coords)


def kirillov(eta: CoalgebraElement, x: AlgebraElement, y: AlgebraElement) -> float:
    """Kirillov form on the orbit through ``eta``, evaluated on ``ad*_x eta`` and ``ad*_y eta``."""
    return pairing(eta, bracket(x, y))
