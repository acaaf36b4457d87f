"""Small exact linear algebra over ``fractions.Fraction`` plus an SVD rank.

Matrices are plain lists of rows.  The exact routines are used wherever an
identity or a kernel is asserted; the floating routine is used for sampled
directions and finite-difference Jacobians.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

RANK_RTOL = 1e-8


def is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


def to_fraction_rows(rows: Sequence[Sequence]) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in rows]


def rref(rows: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form.  Returns ``(reduced_rows, pivot_columns)``."""
    a = to_fraction_rows(rows)
    if not a:
        return [], []
    ncols = len(a[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return a[:r], pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1])


def row_space_basis(rows: Sequence[Sequence]) -> list[list[Fraction]]:
    return rref(rows)[0]


def nullspace(rows: Sequence[Sequence], ncols: int | None = None) -> list[list[Fraction]]:
    """Basis of ``{x : A x = 0}`` for the matrix whose rows are given."""
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    red, pivots = rref(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, p in zip(red, pivots):
            x[p] = -row[f]
        basis.append(x)
    return basis


def inverse(rows: Sequence[Sequence]) -> list[list[Fraction]] | None:
    """Exact inverse of a square matrix, or ``None`` when singular."""
    n = len(rows)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(rows)]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)) or len(red) < n:
        return None
    return [row[n:] for row in red]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list]:
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def numeric_rank(matrix, rtol: float = RANK_RTOL) -> tuple[int, float]:
    """SVD rank with threshold ``rtol * sigma_max``.

    Returns the rank and the smallest retained singular value (0.0 when the
    matrix vanishes).
    """
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return 0, 0.0
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0:
        return 0, 0.0
    kept = sv[sv > rtol * sv[0]]
    return int(kept.size), float(kept[-1])


def numeric_row_space(vectors, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as rows) of the span of ``vectors``."""
    m = np.asarray(vectors, dtype=float)
    if m.size == 0:
        return np.zeros((0, m.shape[-1] if m.ndim == 2 else 0))
    _, sv, vt = np.linalg.svd(m, full_matrices=False)
    if sv[0] == 0.0:
        return np.zeros((0, m.shape[1]))
    return vt[sv > rtol * sv[0]]
