"""End-point map, semigroups of horizontal normal, and cone checks.

A piecewise-constant horizontal control flows along one-parameter subgroups,
so in exponential coordinates its end point is the ordered BCH product of
``duration * direction`` over the pieces.  No ODE integration is involved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize_scalar

from . import linalg
from .algebra import (
    AlgebraElement,
    GradedAlgebra,
    bch_batch,
    bch_product,
    dilate_batch,
    format_element,
    quasi_norm,
    quasi_norm_batch,
)
from .errors import UsageError

FD_STEP = 1e-5
BLOCK_FLOOR = 1e-12


@dataclass(frozen=True)
class HorizontalControl:
    """Ordered pieces ``(duration, horizontal direction)``."""

    algebra: GradedAlgebra
    pieces: tuple[tuple[object, AlgebraElement], ...] = ()

    def __post_init__(self):
        for d, v in self.pieces:
            if not d > 0:
                raise UsageError(f"piece durations must be positive, got {d}")
            if v.algebra != self.algebra:
                raise UsageError("control direction belongs to another algebra")
            if not v.is_horizontal():
                raise UsageError(f"control direction {format_element(v)} is not horizontal")

    @classmethod
    def constant(cls, x: AlgebraElement, duration=1) -> "HorizontalControl":
        return cls(x.algebra, ((duration, x),))

    @property
    def total_duration(self):
        return sum((d for d, _ in self.pieces), 0)

    def __add__(self, other: "HorizontalControl") -> "HorizontalControl":
        if other.algebra != self.algebra:
            raise UsageError("cannot concatenate controls on different algebras")
        return HorizontalControl(self.algebra, self.pieces + other.pieces)

    def reparametrized(self, lam) -> "HorizontalControl":
        """Durations scaled by ``lam`` and directions by ``1/lam``; same end point."""
        inv = 1 / Fraction(lam) if isinstance(lam, (int, Fraction)) else 1 / lam
        return HorizontalControl(self.algebra, tuple((d * lam, v * inv) for d, v in self.pieces))


def endpoint(h: HorizontalControl) -> AlgebraElement:
    p = h.algebra.zero()
    for d, v in h.pieces:
        p = bch_product(p, v * d)
    return p


def endpoint_batch(alg: GradedAlgebra, durations: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """End points of many controls at once.

    ``durations`` has shape ``(N, K)`` and ``directions`` shape ``(N, K, m)``
    in first-layer coordinates.  Zero durations are allowed and act as
    padding.
    """
    durations = np.asarray(durations, dtype=float)
    directions = np.asarray(directions, dtype=float)
    first = alg.layer_indices(1)
    p = np.zeros((durations.shape[0], alg.n))
    for k in range(durations.shape[1]):
        piece = np.zeros_like(p)
        piece[:, first] = durations[:, k, None] * directions[:, k, :]
        p = bch_batch(alg, p, piece)
    return p


def endpoint_jacobian(x: AlgebraElement, pieces: int = 8, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of the end point at the constant control ``x``.

    The control is split into ``pieces`` equal pieces and each first-layer
    coordinate of each piece is perturbed separately, giving an
    ``n x (m * pieces)`` matrix.
    """
    if not x.is_horizontal():
        raise UsageError(f"{format_element(x)} is not horizontal")
    if not 0 < h <= 1e-3:
        raise UsageError("finite-difference step must lie in (0, 1e-3]")
    alg = x.algebra
    m = alg.rank
    base = np.array([float(c) for c in x.horizontal_coords()])
    dur = np.full((2 * m * pieces, pieces), 1.0 / pieces)
    dirs = np.broadcast_to(base, (2 * m * pieces, pieces, m)).copy()
    row = 0
    for k in range(pieces):
        for a in range(m):
            dirs[row, k, a] += h
            dirs[row + 1, k, a] -= h
            row += 2
    ends = endpoint_batch(alg, dur, dirs)
    return ((ends[0::2] - ends[1::2]) / (2 * h)).T


def equilibrate_layers(alg: GradedAlgebra, jac: np.ndarray, floor: float = BLOCK_FLOOR) -> np.ndarray:
    """Scale each layer's block of rows to unit Frobenius norm.

    Higher layers of the end-point differential carry factors like
    ``t**k / k!`` and powers of the direction's components, so the raw
    matrix is graded in scale.  Diagonal scaling keeps the exact rank.
    Blocks below ``floor * ||jac||`` are finite-difference residue and are
    zeroed.
    """
    out = np.array(jac, dtype=float)
    total = np.linalg.norm(out)
    if total == 0:
        return out
    for k in range(1, alg.step + 1):
        idx = alg.layer_indices(k)
        nb = np.linalg.norm(out[idx])
        out[idx] = out[idx] / nb if nb > floor * total else 0.0
    return out


def endpoint_jacobian_rank(x: AlgebraElement, pieces: int = 8, h: float = FD_STEP, rtol: float = linalg.RANK_RTOL) -> int:
    """Numerical rank of the layer-equilibrated end-point Jacobian."""
    if pieces < x.algebra.step:
        raise UsageError(f"need at least s = {x.algebra.step} pieces, got {pieces}")
    jac = equilibrate_layers(x.algebra, endpoint_jacobian(x, pieces, h))
    return linalg.numeric_rank(jac, rtol)[0]


# ---------------------------------------------------------------------------
# semigroup sampling
# ---------------------------------------------------------------------------


def _unit_horizontal(alg: GradedAlgebra, nu) -> np.ndarray:
    if isinstance(nu, AlgebraElement):
        if not nu.is_horizontal():
            raise UsageError("the normal must be horizontal")
        nu = nu.horizontal_coords()
    v = np.asarray([float(c) for c in nu])
    if v.shape != (alg.rank,):
        raise UsageError(f"normal needs {alg.rank} first-layer coordinates")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise UsageError("the normal must be nonzero")
    return v / norm


@dataclass
class SemigroupCloud:
    """Sampled points of the semigroup generated by ``exp(nu_perp + R+ nu)``.

    Row ``i`` of ``points`` is the end point of the control stored in row
    ``i`` of ``durations``/``directions`` (zero durations are padding).
    """

    algebra: GradedAlgebra
    nu: tuple[float, ...]
    points: np.ndarray
    durations: np.ndarray
    directions: np.ndarray
    seed: int
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def control(self, i: int) -> HorizontalControl:
        pieces = []
        for d, u in zip(self.durations[i], self.directions[i]):
            if d > 0:
                pieces.append((float(d), self.algebra.horizontal([float(c) for c in u])))
        return HorizontalControl(self.algebra, tuple(pieces))

    def inverted(self) -> "SemigroupCloud":
        """Pointwise group inverse; controls are reversed and negated."""
        return SemigroupCloud(
            self.algebra,
            tuple(-c for c in self.nu),
            -self.points,
            self.durations[:, ::-1].copy(),
            -self.directions[:, ::-1].copy(),
            self.seed,
            dict(self.params),
        )


def sample_semigroup(
    alg: GradedAlgebra,
    nu,
    count: int = 10_000,
    max_pieces: int = 8,
    magnitude_cap: float = 2.0,
    seed: int = 0,
) -> SemigroupCloud:
    """Random end points of controls whose pieces have nonnegative ``nu`` component.

    Each control has a uniform number of pieces in ``[1, max_pieces]``;
    directions are ``mu * nu + w`` with ``mu ~ |N(0, 1)|`` and ``w`` uniform
    in the unit ball of ``nu_perp``; durations are exponential with mean
    ``1/max_pieces``.  Controls are then time-rescaled (a dilation of the end
    point) so that quasi-norms are spread as ``cap * U**(1/Q)``.
    """
    if count < 0 or max_pieces < 1 or not magnitude_cap > 0:
        raise UsageError("count, max_pieces and magnitude_cap must be positive")
    u = _unit_horizontal(alg, nu)
    m = alg.rank
    rng = np.random.default_rng(seed)
    perp = null_space(u[None, :]) if m > 1 else np.zeros((1, 0))

    npieces = rng.integers(1, max_pieces + 1, size=count)
    mu = np.abs(rng.standard_normal((count, max_pieces)))
    if m > 1:
        g = rng.standard_normal((count, max_pieces, m - 1))
        g /= np.linalg.norm(g, axis=2, keepdims=True)
        rad = rng.random((count, max_pieces)) ** (1.0 / (m - 1))
        w = (g * rad[..., None]) @ perp.T
    else:
        w = np.zeros((count, max_pieces, 1))
    dirs = mu[..., None] * u + w
    dur = rng.exponential(1.0 / max_pieces, size=(count, max_pieces))
    dur[np.arange(max_pieces)[None, :] >= npieces[:, None]] = 0.0
    rho = magnitude_cap * rng.random(count) ** (1.0 / alg.homogeneous_dimension)

    pts = endpoint_batch(alg, dur, dirs)
    norms = quasi_norm_batch(alg, pts) if count else np.zeros(0)
    scale = np.where(norms > 0, rho / np.where(norms > 0, norms, 1.0), 1.0)
    pts = dilate_batch(alg, scale, pts)
    dur = dur * scale[:, None]
    params = {"count": count, "max_pieces": max_pieces, "magnitude_cap": magnitude_cap, "seed": seed}
    return SemigroupCloud(alg, tuple(float(c) for c in u), pts, dur, dirs, seed, params)


def horizontal_pairing(alg: GradedAlgebra, points: np.ndarray, nu) -> np.ndarray:
    """``<layer-1 part of p, nu>`` for each row ``p``."""
    u = np.asarray([float(c) for c in nu])
    return np.atleast_2d(points)[:, alg.layer_indices(1)] @ u


def interior_membership_heuristic(target: AlgebraElement, cloud: SemigroupCloud, radius: float = 0.5) -> str:
    """One-sided interior test: ``"inside"`` or ``"inconclusive"``.

    The target is declared inside when, in the left-translated frame at the
    target, the cloud has points within ``radius`` (quasi-norm) on both sides
    of every coordinate.  Targets with nonpositive ``nu`` pairing are never
    interior and are reported inconclusive.
    """
    if len(cloud) == 0:
        raise UsageError("cloud is empty")
    alg = cloud.algebra
    t = np.array([float(c) for c in target.coeffs])
    if horizontal_pairing(alg, t, cloud.nu)[0] <= 0:
        return "inconclusive"
    rel = bch_batch(alg, -t[None, :], cloud.points)
    near = rel[quasi_norm_batch(alg, rel) <= radius]
    if len(near) == 0:
        return "inconclusive"
    both = np.all(np.any(near > 0, axis=0) & np.any(near < 0, axis=0))
    return "inside" if both else "inconclusive"


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeSpec:
    """Dilation-invariant region.

    ``cap``: points whose unit-normalised dilate lies within ``radius``
    (Euclidean, open) of ``center``.  ``halfspace``: sign of the first-layer
    pairing with ``nu``.  ``cloud``: normalised dilates within ``tolerance``
    of the normalised cloud.  ``orientation="inverse"`` tests ``p^-1``.
    """

    algebra: GradedAlgebra
    kind: str
    center: tuple[float, ...] | None = None
    radius: float | None = None
    nu: tuple[float, ...] | None = None
    strict: bool = True
    points: np.ndarray | None = field(default=None, compare=False)
    tolerance: float | None = None
    orientation: str = "direct"

    @classmethod
    def cap(cls, center: AlgebraElement, radius: float) -> "ConeSpec":
        nrm = quasi_norm(center)
        if nrm == 0:
            raise UsageError("cap center must be nonzero")
        c = dilate_batch(center.algebra, 1.0 / nrm, center.as_array()[None, :])[0]
        return cls(center.algebra, "cap", center=tuple(c), radius=float(radius))

    @classmethod
    def halfspace(cls, alg: GradedAlgebra, nu, strict: bool = True) -> "ConeSpec":
        return cls(alg, "halfspace", nu=tuple(_unit_horizontal(alg, nu)), strict=strict)

    @classmethod
    def cloud(cls, alg: GradedAlgebra, points, tolerance: float) -> "ConeSpec":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nrm = quasi_norm_batch(alg, pts)
        pts = pts[nrm > 0]
        return cls(alg, "cloud", points=dilate_batch(alg, 1.0 / nrm[nrm > 0], pts), tolerance=float(tolerance))

    def inverse(self) -> "ConeSpec":
        flip = "inverse" if self.orientation == "direct" else "direct"
        return ConeSpec(self.algebra, self.kind, self.center, self.radius, self.nu, self.strict,
                        self.points, self.tolerance, flip)

    def contains_batch(self, pts: np.ndarray) -> np.ndarray:
        alg = self.algebra
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.orientation == "inverse":
            pts = -pts
        nrm = quasi_norm_batch(alg, pts)
        nz = nrm > 0
        out = np.zeros(len(pts), dtype=bool)
        if not nz.any():
            return out
        if self.kind == "halfspace":
            val = horizontal_pairing(alg, pts[nz], self.nu)
            out[nz] = val > 0 if self.strict else val >= 0
            return out
        unit = dilate_batch(alg, 1.0 / nrm[nz], pts[nz])
        if self.kind == "cap":
            out[nz] = np.linalg.norm(unit - np.asarray(self.center), axis=1) < self.radius
        elif self.kind == "cloud":
            if len(self.points) == 0:
                return out
            d = np.linalg.norm(unit[:, None, :] - self.points[None, :, :], axis=2).min(axis=1)
            out[nz] = d <= self.tolerance
        else:
            raise UsageError(f"unknown cone kind {self.kind!r}")
        return out


def cone_contains(cone: ConeSpec, p: AlgebraElement | np.ndarray) -> bool:
    arr = p.as_array() if isinstance(p, AlgebraElement) else np.asarray(p, dtype=float)
    return bool(cone.contains_batch(arr[None, :])[0])


@dataclass(frozen=True)
class CheckResult:
    holds: bool
    witness: tuple | None = None
    detail: str = ""


def _as_points(alg: GradedAlgebra, pts) -> list[AlgebraElement]:
    out = []
    for p in pts:
        out.append(p if isinstance(p, AlgebraElement) else alg.element(tuple(float(c) for c in p)))
    return out


def _relative_rows(alg: GradedAlgebra, p: AlgebraElement, others: list[AlgebraElement]) -> np.ndarray:
    """Rows ``p^-1 q``, exact when both points are exact."""
    if p.is_exact and all(q.is_exact for q in others):
        return np.array([bch_product(-p, q).as_array() for q in others]).reshape(len(others), alg.n)
    return bch_batch(alg, -p.as_array()[None, :], np.array([q.as_array() for q in others]).reshape(-1, alg.n))


def cone_property_check(gamma: Sequence, cone: ConeSpec) -> CheckResult:
    """Outer cone property: no ``q`` in ``gamma`` lies in ``p C`` for ``p`` in ``gamma``."""
    alg = cone.algebra
    pts = _as_points(alg, gamma)
    for i, p in enumerate(pts):
        others = [q for j, q in enumerate(pts) if j != i]
        if not others:
            continue
        hit = cone.contains_batch(_relative_rows(alg, p, others))
        if hit.any():
            k = int(np.argmax(hit))
            j = k if k < i else k + 1
            return CheckResult(False, (i, j), f"point {j} lies in the cone translated to point {i}")
    return CheckResult(True)


def _lip_ratio(alg: GradedAlgebra, x: np.ndarray, w: np.ndarray, ts: np.ndarray) -> np.ndarray:
    # ||exp(tX)^-1 w|| / ||exp(tX)|| for each t
    ells = ts[:, None] * x[None, :]
    rel = bch_batch(alg, -ells, np.broadcast_to(w, ells.shape))
    return quasi_norm_batch(alg, rel) / (np.abs(ts) * quasi_norm_batch(alg, x[None, :])[0])


def lipschitz_cone_check(sigma: Sequence, x: AlgebraElement, beta: float, grid: int = 64) -> CheckResult:
    """Intrinsic Lipschitz cone condition around the line ``exp(tX)``.

    Violated when some ``p^-1 q`` lies within quasi-norm ``beta * ||exp(tX)||``
    of ``exp(tX)`` for some ``t != 0``.  ``t`` is searched on a log grid over
    ``[||p^-1 q||/8, 8 ||p^-1 q||]`` (both signs) plus the first-layer
    projection, then refined by a bounded scalar minimisation.
    """
    if not beta > 0:
        raise UsageError("beta must be positive")
    if not x.is_horizontal() or x.is_zero():
        raise UsageError("the line must be spanned by a nonzero horizontal vector")
    alg = x.algebra
    xa = x.as_array()
    xnorm = quasi_norm(x)
    first = alg.layer_indices(1)
    pts = _as_points(alg, sigma)
    for i, p in enumerate(pts):
        for j, q in enumerate(pts):
            if i == j:
                continue
            w = _relative_rows(alg, p, [q])[0]
            wn = quasi_norm_batch(alg, w[None, :])[0]
            if wn == 0:
                continue
            base = np.geomspace(wn / (8 * xnorm), 8 * wn / xnorm, grid)
            ts = np.concatenate([base, -base])
            proj = float(w[first] @ xa[first]) / float(xa[first] @ xa[first])
            if proj != 0:
                ts = np.append(ts, proj)
            vals = _lip_ratio(alg, xa, w, ts)
            k = int(np.argmin(vals))
            best_t, best = ts[k], vals[k]
            if best >= beta and k < 2 * grid:
                half = base if k < grid else -base
                kk = k % grid
                lo, hi = half[max(kk - 1, 0)], half[min(kk + 1, grid - 1)]
                lo, hi = min(lo, hi), max(lo, hi)
                res = minimize_scalar(lambda t: _lip_ratio(alg, xa, w, np.array([t]))[0], bounds=(lo, hi),
                                      method="bounded", options={"xatol": 1e-10 * max(abs(lo), abs(hi))})
                if res.fun < best:
                    best_t, best = float(res.x), float(res.fun)
            if best < beta:
                return CheckResult(False, (i, j, float(best_t)),
                                   f"p^-1 q for points {i}, {j} is within {best:.6g}*||l|| of l = exp({best_t:.6g} X)")
    return CheckResult(True)
