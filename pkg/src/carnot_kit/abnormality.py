"""Abnormal horizontal directions.

A horizontal ``X`` is non-abnormal exactly when the vectors ``ad_X^k(e)``,
``e`` in the first layer and ``0 <= k < s``, span the whole algebra.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg
from .algebra import AlgebraElement, GradedAlgebra, bracket_batch, format_element
from .errors import UsageError


@dataclass(frozen=True)
class Subspace:
    basis: tuple
    dim: int
    ambient: int
    margin: float | None = None  # smallest retained singular value, float mode only


@dataclass(frozen=True)
class AbnormalityVerdict:
    direction: AlgebraElement
    span_dim: int
    full_dim: int
    rank_margin: float | int

    @property
    def non_abnormal(self) -> bool:
        return self.span_dim == self.full_dim


@dataclass
class AnalysisReport:
    """Result of a sampled abnormality scan."""

    algebra: str
    resolution: int
    samples: list[tuple] = field(default_factory=list)
    abnormal: list[int] = field(default_factory=list)
    span_dims: list[int] = field(default_factory=list)
    min_margin: float | None = None

    @property
    def abnormal_count(self) -> int:
        return len(self.abnormal)

    def summary(self) -> str:
        return f"{self.abnormal_count}/{self.resolution} abnormal"

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "resolution": self.resolution,
            "abnormal_count": self.abnormal_count,
            "abnormal": [list(self.samples[i]) for i in self.abnormal],
            "abnormal_span_dims": [self.span_dims[i] for i in self.abnormal],
            "min_margin_non_abnormal": self.min_margin,
        }


def _require_horizontal(x: AlgebraElement) -> None:
    if not isinstance(x, AlgebraElement):
        raise UsageError("expected an AlgebraElement")
    if not x.is_horizontal():
        raise UsageError(f"{format_element(x)} is not horizontal")
    if x.is_zero():
        raise UsageError("the zero vector is not a direction")


def _chain_vectors(alg: GradedAlgebra, x_coeffs, exact: bool) -> list:
    first = alg.layer_indices(1)
    if exact:
        cur = [alg.basis_element(i).coeffs for i in first]
        out = list(cur)
        for _ in range(1, alg.step):
            cur = [alg.bracket_coeffs(x_coeffs, v) for v in cur]
            cur = [v for v in cur if any(v)]
            out += cur
        return out
    x = np.asarray([float(c) for c in x_coeffs])
    cur = np.eye(alg.n)[first]
    out = [cur]
    for _ in range(1, alg.step):
        cur = bracket_batch(alg, np.broadcast_to(x, cur.shape), cur)
        out.append(cur)
    return list(np.vstack(out))


def ad_chain_span(x: AlgebraElement, exact: bool | None = None, rtol: float = linalg.RANK_RTOL) -> Subspace:
    """Span of ``ad_X^k(g1)`` for ``k = 0..s-1``.

    Exact row reduction when the coefficients are rational (or ``exact`` is
    forced), SVD with relative threshold ``rtol`` (1e-8) otherwise.
    """
    _require_horizontal(x)
    alg = x.algebra
    if exact is None:
        exact = x.is_exact
    coeffs = [Fraction(c) for c in x.coeffs] if exact else x.coeffs
    vecs = _chain_vectors(alg, coeffs, exact)
    if exact:
        basis = linalg.row_space_basis(vecs)
        return Subspace(tuple(tuple(r) for r in basis), len(basis), alg.n)
    rows = linalg.numeric_row_space(vecs, rtol)
    _, margin = linalg.numeric_rank(vecs, rtol)
    return Subspace(tuple(tuple(r) for r in rows), len(rows), alg.n, margin)


def _unit(x: AlgebraElement) -> AlgebraElement:
    top = max(abs(c) for c in x.coeffs)
    return x * (1 / Fraction(top) if x.is_exact else 1 / top)


def is_non_abnormal(x: AlgebraElement, exact: bool | None = None, rtol: float = linalg.RANK_RTOL) -> AbnormalityVerdict:
    sp = ad_chain_span(x, exact, rtol)
    margin = sp.dim if sp.margin is None else sp.margin
    return AbnormalityVerdict(_unit(x), sp.dim, x.algebra.n, margin)


def _canonical_line(vec: list[Fraction]) -> tuple[Fraction, ...]:
    lead = next(c for c in vec if c != 0)
    return tuple(c / lead for c in vec)


def is_filiform(alg: GradedAlgebra) -> bool:
    dims = alg.layer_dims
    return len(dims) >= 2 and dims[0] == 2 and all(d == 1 for d in dims[1:])


def abnormal_directions_filiform(alg: GradedAlgebra) -> list[AlgebraElement]:
    """Every abnormal horizontal line of a filiform algebra, exactly.

    A line through ``X`` is abnormal iff ``[X, Y_i] = 0`` for the basis
    vector ``Y_i`` of some layer ``i`` in ``2..s-1``; each such condition is
    the kernel of a linear form on the first layer.  Lines are returned once,
    with first nonzero coordinate equal to 1.
    """
    if not is_filiform(alg):
        raise UsageError(
            f"{alg.name} has layer dimensions {alg.layer_dims}, not (2, 1, ..., 1); use scan_abnormal_directions"
        )
    if alg.step < 3:
        raise UsageError("exact filiform enumeration needs step s >= 3")
    first = alg.layer_indices(1)
    lines: list[tuple[Fraction, ...]] = []
    for i in range(2, alg.step):
        (yi,) = alg.layer_indices(i)
        (target,) = alg.layer_indices(i + 1)
        y = alg.basis_element(yi).coeffs
        form = [Fraction(alg.bracket_coeffs(alg.basis_element(e).coeffs, y)[target]) for e in first]
        for ker in linalg.nullspace([form], 2):
            line = _canonical_line(ker)
            if line not in lines:
                lines.append(line)
    return [alg.horizontal(line) for line in sorted(lines, reverse=True)]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("CARNOT_KIT_THREADS", "1")))
    except ValueError:
        return 1


def sphere_directions(m: int, resolution: int, seed: int = 0) -> np.ndarray:
    """Deterministic sample of the unit sphere in ``R^m``.

    For ``m == 2`` the circle is sampled uniformly starting at angle 0, with
    coordinates within 1e-15 of 0 or 1 snapped so the axes are hit exactly.
    """
    if m == 1:
        pts = np.array([[1.0], [-1.0]] * ((resolution + 1) // 2))[:resolution]
    elif m == 2:
        th = 2 * math.pi * np.arange(resolution) / resolution
        pts = np.column_stack([np.cos(th), np.sin(th)])
    else:
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((resolution, m))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts[np.abs(pts) < 1e-15] = 0.0
    pts[np.abs(np.abs(pts) - 1.0) < 1e-15] = np.sign(pts[np.abs(np.abs(pts) - 1.0) < 1e-15])
    return pts


def scan_abnormal_directions(alg: GradedAlgebra, resolution: int, seed: int = 0,
                             rtol: float = linalg.RANK_RTOL) -> AnalysisReport:
    """Classify ``resolution`` directions sampled on the unit sphere of g1."""
    if resolution < 8:
        raise UsageError("scan resolution must be at least 8")
    dirs = sphere_directions(alg.rank, resolution, seed)

    def verdict(u):
        x = alg.horizontal(list(u)).to_float()
        return is_non_abnormal(x, exact=False, rtol=rtol)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            verdicts = list(pool.map(verdict, dirs))
    else:
        verdicts = [verdict(u) for u in dirs]
    rep = AnalysisReport(alg.name, resolution, samples=[tuple(float(c) for c in u) for u in dirs])
    margins = []
    for i, v in enumerate(verdicts):
        rep.span_dims.append(v.span_dim)
        if v.non_abnormal:
            margins.append(v.rank_margin)
        else:
            rep.abnormal.append(i)
    rep.min_margin = min(margins) if margins else None
    return rep
