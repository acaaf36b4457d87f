"""Constructors for the standard Carnot algebras and for products/quotients."""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import linalg
from .algebra import AlgebraElement, GradedAlgebra, format_element
from .errors import ConstructorError, NotAnIdealError, UsageError

DEFAULT_DIMENSION_CAP = 64


def make_abelian(m: int) -> GradedAlgebra:
    if m < 1:
        raise ConstructorError("abelian algebra needs rank m >= 1")
    return GradedAlgebra.from_layers(f"abelian:{m}", [[f"X{i}" for i in range(1, m + 1)]])


def make_heisenberg() -> GradedAlgebra:
    return GradedAlgebra.from_layers("heis", [["X1", "X2"], ["Z"]], {("X1", "X2"): {"Z": 1}})


def make_filiform(kind: str, s: int) -> GradedAlgebra:
    """Filiform algebra with basis ``X0, ..., Xs`` (``X0, X1`` horizontal).

    First kind: ``[X0, Xi] = X(i+1)`` for ``1 <= i <= s-1``.
    Second kind: ``[X0, Xi] = X(i+1)`` for ``1 <= i <= s-2`` and
    ``[Xi, X(s-i)] = (-1)**i Xs``; it exists only for odd ``s = 2n+1 >= 5``.
    """
    kind = {"1": "first", "2": "second"}.get(str(kind), str(kind))
    layers = [["X0", "X1"]] + [[f"X{i}"] for i in range(2, s + 1)]
    if kind == "first":
        if s < 2:
            raise ConstructorError("filiform algebras of the first kind need step s >= 2")
        brackets = {("X0", f"X{i}"): {f"X{i + 1}": 1} for i in range(1, s)}
    elif kind == "second":
        if s < 5 or s % 2 == 0:
            raise ConstructorError(
                f"filiform algebras of the second kind exist only for odd step s = 2n+1 with n >= 2 (got s={s}); "
                "every other filiform algebra is of the first kind (Vergne)"
            )
        brackets = {("X0", f"X{i}"): {f"X{i + 1}": 1} for i in range(1, s - 1)}
        for i in range(1, (s + 1) // 2):
            brackets[(f"X{i}", f"X{s - i}")] = {f"X{s}": (-1) ** i}
    else:
        raise ConstructorError(f"unknown filiform kind {kind!r}; expected 'first' or 'second'")
    return GradedAlgebra.from_layers(f"filiform{1 if kind == 'first' else 2}:{s}", layers, brackets)


# ---------------------------------------------------------------------------
# free nilpotent algebras via a Hall basis
# ---------------------------------------------------------------------------


def hall_basis(m: int, s: int, cap: int | None = None) -> list:
    """Hall trees on generators ``0..m-1`` up to length ``s``.

    A tree is an ``int`` (generator) or a pair ``(u, v)`` standing for
    ``[u, v]``.  The order is by length, then by generation order; a pair is
    basic when ``u > v`` and, if ``u = (u1, u2)``, ``u2 <= v``.
    """
    trees: list = list(range(m))
    length = {t: 1 for t in trees}
    order = {t: i for i, t in enumerate(trees)}
    for L in range(2, s + 1):
        new = []
        for u in trees:
            for v in trees:
                if length[u] + length[v] != L or order[u] <= order[v]:
                    continue
                if isinstance(u, tuple) and order[u[1]] > order[v]:
                    continue
                new.append((u, v))
                if cap is not None and len(trees) + len(new) > cap:
                    raise ConstructorError(f"free nilpotent algebra exceeds the dimension cap {cap}")
        for t in new:
            length[t] = L
            order[t] = len(order)
            trees.append(t)
    return trees


def _tree_length(t) -> int:
    return 1 if isinstance(t, int) else _tree_length(t[0]) + _tree_length(t[1])


def _foliage(t) -> tuple[int, ...]:
    return (t,) if isinstance(t, int) else _foliage(t[0]) + _foliage(t[1])


def _expand(t, cache: dict) -> dict[tuple[int, ...], int]:
    """Tree as a polynomial in the free associative algebra (word -> coeff)."""
    if t in cache:
        return cache[t]
    if isinstance(t, int):
        poly = {(t,): 1}
    else:
        poly = _poly_bracket(_expand(t[0], cache), _expand(t[1], cache))
    cache[t] = poly
    return poly


def _poly_bracket(p: dict, q: dict) -> dict:
    out: dict = {}
    for a, x in p.items():
        for b, y in q.items():
            out[a + b] = out.get(a + b, 0) + x * y
            out[b + a] = out.get(b + a, 0) - x * y
    return {w: c for w, c in out.items() if c}


def make_free_nilpotent(m: int, s: int, cap: int = DEFAULT_DIMENSION_CAP) -> GradedAlgebra:
    """Free nilpotent Lie algebra of rank ``m`` and step ``s`` in a Hall basis."""
    if m < 2 or s < 1:
        raise ConstructorError("free nilpotent algebras need rank m >= 2 and step s >= 1")
    trees = hall_basis(m, s, cap)
    sep = "" if m <= 9 else "_"
    labels = ["X" + sep.join(str(i + 1) for i in _foliage(t)) for t in trees]
    lengths = [_tree_length(t) for t in trees]
    cache: dict = {}
    polys = [_expand(t, cache) for t in trees]

    # per degree: pivot words and the inverse of the pivot block
    coord = {}
    for L in range(1, s + 1):
        idx = [i for i, l in enumerate(lengths) if l == L]
        words = sorted({w for i in idx for w in polys[i]})
        rows = [[polys[i].get(w, 0) for w in words] for i in idx]
        _, piv = linalg.rref(rows)
        block = [[polys[i].get(words[p], 0) for i in idx] for p in piv]
        inv = linalg.inverse(block)
        coord[L] = (idx, [words[p] for p in piv], inv)

    brackets = {}
    for a in range(len(trees)):
        for b in range(a + 1, len(trees)):
            L = lengths[a] + lengths[b]
            if L > s:
                continue
            poly = _poly_bracket(polys[a], polys[b])
            if not poly:
                continue
            idx, pw, inv = coord[L]
            rhs = [poly.get(w, 0) for w in pw]
            sol = [sum((r * x for r, x in zip(row, rhs)), Fraction(0)) for row in inv]
            brackets[(labels[a], labels[b])] = {labels[i]: c for i, c in zip(idx, sol) if c}
    layers = [[labels[i] for i, l in enumerate(lengths) if l == L] for L in range(1, s + 1)]
    return GradedAlgebra.from_layers(f"free:{m},{s}", layers, brackets)


# ---------------------------------------------------------------------------
# products and quotients
# ---------------------------------------------------------------------------


def _product_layout(a: GradedAlgebra, b: GradedAlgebra):
    rename = set(a.basis) & set(b.basis)
    b_labels = [lab + "'" if rename else lab for lab in b.basis]
    order = []  # (source, index) in layer order
    for k in range(1, max(a.step, b.step) + 1):
        order += [("a", i) for i in a.layer_indices(k)]
        order += [("b", i) for i in b.layer_indices(k)]
    return order, b_labels


def direct_product(a: GradedAlgebra, b: GradedAlgebra, name: str | None = None) -> GradedAlgebra:
    """Direct sum with componentwise brackets; layer k is ``a_k + b_k``."""
    order, b_labels = _product_layout(a, b)
    pos = {item: p for p, item in enumerate(order)}
    basis = tuple(a.basis[i] if src == "a" else b_labels[i] for src, i in order)
    weights = tuple((a if src == "a" else b).weights[i] for src, i in order)
    table = {}
    for src, alg in (("a", a), ("b", b)):
        for (i, j), rhs in alg.structure.items():
            table[(pos[(src, i)], pos[(src, j)])] = {pos[(src, k)]: Fraction(c) for k, c in rhs.items()}
    return GradedAlgebra(name or f"({a.name})x({b.name})", basis, weights, table)


def product_pair(product: GradedAlgebra, x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """The element ``(x, y)`` of ``direct_product(x.algebra, y.algebra)``."""
    order, _ = _product_layout(x.algebra, y.algebra)
    if len(order) != product.n:
        raise UsageError("product algebra does not match the factors of the given elements")
    return product.element(x.coeffs[i] if src == "a" else y.coeffs[i] for src, i in order)


def product_factors(product: GradedAlgebra, a: GradedAlgebra, b: GradedAlgebra, z: AlgebraElement):
    """Split an element of ``direct_product(a, b)`` into its two components."""
    order, _ = _product_layout(a, b)
    ca, cb = [0] * a.n, [0] * b.n
    for c, (src, i) in zip(z.coeffs, order):
        (ca if src == "a" else cb)[i] = c
    return a.element(ca), b.element(cb)


@dataclass(frozen=True)
class Projection:
    """Linear map ``source -> target``; ``matrix[r][c]`` is the ``r``-th coordinate of the image of ``e_c``."""

    source: GradedAlgebra
    target: GradedAlgebra
    matrix: tuple[tuple[Fraction, ...], ...]

    def __call__(self, x: AlgebraElement) -> AlgebraElement:
        if x.algebra != self.source:
            raise UsageError("projection applied to an element of another algebra")
        return self.target.element(sum((r * c for r, c in zip(row, x.coeffs)), 0 * x.coeffs[0]) for row in self.matrix)


def quotient(a: GradedAlgebra, ideal_span: Sequence[AlgebraElement], name: str | None = None):
    """Quotient by the graded ideal spanned by ``ideal_span``.

    Both gradedness and the ideal property are checked; a failure raises
    :class:`NotAnIdealError` carrying the escaping vector as ``witness``.
    Returns ``(quotient_algebra, projection)``.
    """
    vecs = [list(map(Fraction, v.coeffs)) for v in ideal_span if not v.is_zero()]
    for v in ideal_span:
        if v.algebra != a:
            raise UsageError("ideal generators must belong to the algebra being divided")
    span = linalg.row_space_basis(vecs) if vecs else []

    def inside(vec) -> bool:
        if not any(vec):
            return True
        return linalg.rank(span + [list(vec)]) == len(span)

    for v in span:
        for k in range(1, a.step + 1):
            part = [c if w == k else 0 for c, w in zip(v, a.weights)]
            if not inside(part):
                el = a.element(part)
                raise NotAnIdealError(f"span is not graded: layer-{k} part {format_element(el)} escapes it", el)
    for v in span:
        for i in range(a.n):
            br = a.bracket_coeffs(a.basis_element(i).coeffs, v)
            if not inside(br):
                el = a.element(br)
                raise NotAnIdealError(
                    f"span is not an ideal: [{a.basis[i]}, {format_element(a.element(v))}] = {format_element(el)} escapes it",
                    (a.basis[i], a.element(v), el),
                )

    kept: list[int] = []
    matrix_cols: dict[int, list[Fraction]] = {}
    for k in range(1, a.step + 1):
        idx = a.layer_indices(k)
        ideal_k = linalg.row_space_basis([[v[i] for i in idx] for v in span]) if span else []
        chosen: list[int] = []
        cur = [row[:] for row in ideal_k]
        for t, i in enumerate(idx):
            e = [Fraction(int(u == t)) for u in range(len(idx))]
            if linalg.rank(cur + [e]) > len(cur):
                cur.append(e)
                chosen.append(t)
        # express each layer basis vector in terms of (chosen unit vectors, ideal basis)
        gens = [[Fraction(int(u == t)) for u in range(len(idx))] for t in chosen] + ideal_k
        inv = linalg.inverse(gens) if gens else []
        for t, i in enumerate(idx):
            if not gens:
                continue
            # row vector coords: e_t = sum coords[r] * gens[r]  =>  coords = e_t * inv
            coords = inv[t]
            matrix_cols[i] = coords[: len(chosen)]
        kept += [idx[t] for t in chosen]
        for i in idx:
            matrix_cols.setdefault(i, [])

    # assemble projection rows in kept order
    pos = {i: r for r, i in enumerate(kept)}
    layer_offset = {}
    for k in range(1, a.step + 1):
        layer_offset[k] = [pos[i] for i in kept if a.weights[i] == k]
    mat = [[Fraction(0)] * a.n for _ in kept]
    for i in range(a.n):
        rows = layer_offset[a.weights[i]]
        for r, c in zip(rows, matrix_cols[i]):
            mat[r][i] = c
    basis = tuple(a.basis[i] for i in kept)
    weights = tuple(a.weights[i] for i in kept)
    table = {}
    for p, i in enumerate(kept):
        for q, j in enumerate(kept):
            if p >= q:
                continue
            br = a.bracket_coeffs(a.basis_element(i).coeffs, a.basis_element(j).coeffs)
            img = {r: sum((row[c] * br[c] for c in range(a.n)), Fraction(0)) for r, row in enumerate(mat)}
            img = {r: v for r, v in img.items() if v}
            if img:
                table[(p, q)] = img
    q_alg = GradedAlgebra(name or f"{a.name}/I{len(span)}", basis, weights, table)
    return q_alg, Projection(a, q_alg, tuple(tuple(row) for row in mat))


# ---------------------------------------------------------------------------
# builtin registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlgebraSpecTag:
    """Family descriptor for the catalog, e.g. ``AlgebraSpecTag("free_nilpotent", (2, 3))``."""

    family: str
    params: tuple = ()

    def build(self) -> GradedAlgebra:
        f, p = self.family, self.params
        if f == "abelian":
            return make_abelian(*p)
        if f == "heisenberg":
            return make_heisenberg()
        if f == "filiform_first":
            return make_filiform("first", *p)
        if f == "filiform_second":
            return make_filiform("second", *p)
        if f == "free_nilpotent":
            return make_free_nilpotent(*p)
        if f == "product":
            return direct_product(p[0].build(), p[1].build())
        if f == "quotient":
            base = p[0].build()
            return quotient(base, [base.element(v) for v in p[1]])[0]
        raise ConstructorError(f"unknown family {f!r}")


_BUILTIN = [
    (r"abelian:(\d+)", lambda g: AlgebraSpecTag("abelian", (int(g[0]),))),
    (r"heis", lambda g: AlgebraSpecTag("heisenberg")),
    (r"engel", lambda g: AlgebraSpecTag("filiform_first", (3,))),
    (r"filiform1:(\d+)", lambda g: AlgebraSpecTag("filiform_first", (int(g[0]),))),
    (r"filiform2:(\d+)", lambda g: AlgebraSpecTag("filiform_second", (int(g[0]),))),
    (r"free:(\d+),(\d+)", lambda g: AlgebraSpecTag("free_nilpotent", (int(g[0]), int(g[1])))),
    (r"cartan", lambda g: AlgebraSpecTag("free_nilpotent", (2, 3))),
]

BUILTIN_SYNTAX = ("abelian:m", "heis", "engel", "filiform1:s", "filiform2:s", "free:m,s", "cartan")


def parse_builtin(name: str) -> AlgebraSpecTag | None:
    for pattern, make in _BUILTIN:
        hit = re.fullmatch(pattern, name.strip())
        if hit:
            return make(hit.groups())
    return None


def builtin(name: str) -> GradedAlgebra:
    tag = parse_builtin(name)
    if tag is None:
        raise UsageError(f"unknown builtin {name!r}; expected one of {', '.join(BUILTIN_SYNTAX)}")
    alg = tag.build()
    if name in ("engel", "cartan"):
        alg = GradedAlgebra(name, alg.basis, alg.weights, alg.structure)
    return alg
