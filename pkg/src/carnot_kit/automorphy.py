"""Graded automorphisms and graded derivations, in exact arithmetic.

Because a stratified algebra is generated by its first layer, a graded
automorphism is determined by its first-layer block.  ``extend_graded_map``
pushes a first-layer matrix up layer by layer and reports the first relation
that the pushed map fails to respect.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import linalg
from .algebra import GradedAlgebra, format_element
from .errors import UsageError


@dataclass(frozen=True)
class GradedMapCandidate:
    """First-layer matrix; column ``j`` holds the image of the ``j``-th horizontal basis vector."""

    algebra: GradedAlgebra
    first_layer_matrix: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        m = self.algebra.rank
        mat = self.first_layer_matrix
        if len(mat) != m or any(len(row) != m for row in mat):
            raise UsageError(f"first-layer matrix must be {m}x{m} for {self.algebra.name}")
        object.__setattr__(self, "first_layer_matrix", tuple(tuple(Fraction(v) for v in row) for row in mat))


@dataclass(frozen=True)
class ExtensionResult:
    status: str  # "automorphism" or "obstructed"
    full_map: tuple[tuple[Fraction, ...], ...] | None = None
    obstruction: str | None = None
    witness: tuple | None = None

    @property
    def ok(self) -> bool:
        return self.status == "automorphism"


def _column(mat, j):
    return [row[j] for row in mat]


def _apply(mat, vec):
    return [sum((a * b for a, b in zip(row, vec)), Fraction(0)) for row in mat]


def extend_graded_map(c: GradedMapCandidate) -> ExtensionResult:
    """Extend a first-layer linear map to a graded Lie algebra automorphism.

    Layer ``k+1`` is spanned by the brackets ``[e_a, f_b]`` with ``e_a`` in
    the first layer and ``f_b`` in layer ``k``.  The image of layer ``k+1``
    is forced by ``psi[e_a, f_b] = [psi e_a, psi f_b]``; it is well defined
    only if every linear relation among those brackets is preserved.  After
    the layer sweep, all remaining basis brackets are checked as well.
    """
    alg = c.algebra
    n = alg.n
    first = alg.layer_indices(1)
    m1 = [list(row) for row in c.first_layer_matrix]
    if linalg.inverse(m1) is None:
        return ExtensionResult("obstructed", obstruction="not bijective on g1", witness=("g1",))

    psi = [[Fraction(0)] * n for _ in range(n)]  # psi[r][col]
    for jj, j in enumerate(first):
        for ii, i in enumerate(first):
            psi[i][j] = m1[ii][jj]
    basis = [alg.basis_element(i).coeffs for i in range(n)]
    br = alg.bracket_coeffs

    def image(i):
        return _column(psi, i)

    for k in range(1, alg.step):
        lower = alg.layer_indices(k)
        upper = alg.layer_indices(k + 1)
        pairs = [(a, b) for a in first for b in lower]
        # B: pair -> coordinates in layer k+1 ; T: pair -> pushed image (full coords)
        bcols = [[br(basis[a], basis[b])[t] for t in upper] for a, b in pairs]
        tcols = [br(image(a), image(b)) for a, b in pairs]
        _, piv = linalg.rref([list(r) for r in zip(*bcols)]) if bcols else ([], [])
        if len(piv) != len(upper):
            raise UsageError(f"{alg.name} is not stratified at layer {k + 1}; validate it first")
        # L maps layer-(k+1) coordinates to images: L * B_piv = T_piv
        bpiv = [[bcols[p][r] for p in piv] for r in range(len(upper))]
        inv = linalg.inverse(bpiv)
        tpiv = [[tcols[p][r] for p in piv] for r in range(n)]
        lmap = linalg.matmul(tpiv, inv)
        for col, t in enumerate(upper):
            for r in range(n):
                psi[r][t] = lmap[r][col]
        for (a, b), bc, tc in zip(pairs, bcols, tcols):
            pushed = _apply(lmap, bc)
            if any(x != y for x, y in zip(pushed, tc)):
                rel = _relation(alg, pairs, bcols, piv, (a, b))
                return ExtensionResult(
                    "obstructed",
                    obstruction=(
                        f"relation {rel} holds in {alg.name} but its image is "
                        f"{format_element(alg.element([x - y for x, y in zip(tc, pushed)]))} != 0"
                    ),
                    witness=("relation", rel),
                )

    bad = _first_bracket_failure(alg, psi)
    if bad is not None:
        i, j, lhs, rhs = bad
        return ExtensionResult(
            "obstructed",
            obstruction=(
                f"psi[{alg.basis[i]},{alg.basis[j]}] = {format_element(alg.element(lhs))} "
                f"but [psi {alg.basis[i]}, psi {alg.basis[j]}] = {format_element(alg.element(rhs))}"
            ),
            witness=("bracket", alg.basis[i], alg.basis[j]),
        )
    return ExtensionResult("automorphism", full_map=tuple(tuple(row) for row in psi))


def _relation(alg, pairs, bcols, piv, pair) -> str:
    """Spell out the bracket relation that expresses ``pair`` through the pivot brackets."""
    q = pairs.index(pair)
    bpiv = [[bcols[p][r] for p in piv] for r in range(len(bcols[0]))]
    coeffs = _apply(linalg.inverse(bpiv), bcols[q])
    lab = alg.basis
    terms = [f"[{lab[pairs[p][0]]},{lab[pairs[p][1]]}]" if c == 1 else f"{c}*[{lab[pairs[p][0]]},{lab[pairs[p][1]]}]"
             for c, p in zip(coeffs, piv) if c]
    return f"[{lab[pair[0]]},{lab[pair[1]]}] = " + (" + ".join(terms) if terms else "0")


def _first_bracket_failure(alg: GradedAlgebra, mat):
    n = alg.n
    cols = [_column(mat, i) for i in range(n)]
    br = alg.bracket_coeffs
    for i in range(n):
        for j in range(i + 1, n):
            lhs = _apply(mat, br(alg.basis_element(i).coeffs, alg.basis_element(j).coeffs))
            rhs = br(cols[i], cols[j])
            if any(x != y for x, y in zip(lhs, rhs)):
                return i, j, lhs, rhs
    return None


def is_graded_automorphism(full_map: Sequence[Sequence], alg: GradedAlgebra) -> bool:
    """Invertible, layer preserving and bracket preserving on all basis pairs."""
    n = alg.n
    mat = [[Fraction(v) for v in row] for row in full_map]
    if len(mat) != n or any(len(row) != n for row in mat):
        return False
    for r in range(n):
        for col in range(n):
            if mat[r][col] != 0 and alg.weights[r] != alg.weights[col]:
                return False
    if linalg.inverse(mat) is None:
        return False
    return _first_bracket_failure(alg, mat) is None


def graded_derivation_dimension(alg: GradedAlgebra) -> int:
    """Dimension of the space of layer-preserving derivations.

    Unknowns are the entries of the diagonal blocks; each basis pair gives
    the linear equations ``D[x, y] = [Dx, y] + [x, Dy]``.
    """
    n = alg.n
    unknowns = [(r, col) for col in range(n) for r in range(n) if alg.weights[r] == alg.weights[col]]
    uidx = {u: t for t, u in enumerate(unknowns)}
    basis = [alg.basis_element(i).coeffs for i in range(n)]
    br = alg.bracket_coeffs
    const = [[br(basis[i], basis[j]) for j in range(n)] for i in range(n)]
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            # coefficient of each unknown in component r of D[e_i,e_j] - [D e_i, e_j] - [e_i, D e_j]
            eq = [[Fraction(0)] * len(unknowns) for _ in range(n)]
            for k, c in enumerate(const[i][j]):
                if c:
                    for r in range(n):
                        if (r, k) in uidx:
                            eq[r][uidx[(r, k)]] += c
            for r_src in range(n):
                # D e_i has component r_src with unknown (r_src, i)
                if (r_src, i) in uidx:
                    for r, c in enumerate(const[r_src][j]):
                        if c:
                            eq[r][uidx[(r_src, i)]] -= c
                if (r_src, j) in uidx:
                    for r, c in enumerate(const[i][r_src]):
                        if c:
                            eq[r][uidx[(r_src, j)]] -= c
            rows += [row for row in eq if any(row)]
    return len(unknowns) - (linalg.rank(rows) if rows else 0)


def compose(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list[Fraction]]:
    """Matrix of ``a o b``."""
    return linalg.matmul(a, b)
