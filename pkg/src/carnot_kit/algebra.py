"""Graded nilpotent Lie algebras and the group law in exponential coordinates.

A group point is identified with the algebra element it is the exponential
of, so the group product is the Baker-Campbell-Hausdorff series, which
terminates at the step of the algebra.  Coefficients are either exact
(``int``/``Fraction``) or ``float``; every routine keeps exact inputs exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg
from .errors import StructureError, UsageError

Scalar = "int | Fraction | float"


@dataclass(frozen=True, eq=False)
class GradedAlgebra:
    """A stratified nilpotent Lie algebra given by structure constants.

    ``structure`` maps an ordered basis-index pair ``(i, j)`` to the sparse
    coefficients ``{k: c}`` of ``[e_i, e_j]``.  Pairs that are absent bracket
    to zero and ``(j, i)`` is completed by antisymmetry.  The constructor does
    not check anything; use :func:`validate_algebra`.
    """

    name: str
    basis: tuple[str, ...]
    weights: tuple[int, ...]
    structure: Mapping[tuple[int, int], Mapping[int, Fraction]] = field(default_factory=dict)

    @classmethod
    def from_layers(
        cls,
        name: str,
        layers: Sequence[Sequence[str]],
        brackets: Mapping[tuple[str, str], Mapping[str, object]] | None = None,
    ) -> "GradedAlgebra":
        """Build from layer label lists and a label-keyed bracket table.

        >>> h = GradedAlgebra.from_layers("heis", [["X1", "X2"], ["Z"]], {("X1", "X2"): {"Z": 1}})
        >>> h.layer_dims
        (2, 1)
        """
        basis = tuple(label for layer in layers for label in layer)
        weights = tuple(w for w, layer in enumerate(layers, start=1) for _ in layer)
        index = {label: i for i, label in enumerate(basis)}
        if len(index) != len(basis):
            raise StructureError(f"duplicate basis labels in {name!r}")
        table: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (a, b), rhs in (brackets or {}).items():
            try:
                key = (index[a], index[b])
                coeffs = {index[t]: Fraction(c) for t, c in rhs.items() if c != 0}
            except KeyError as exc:
                raise StructureError(f"unknown label {exc.args[0]!r} in bracket [{a},{b}]") from None
            table[key] = coeffs
        return cls(name, basis, weights, table)

    # -- derived data ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.basis)

    @property
    def step(self) -> int:
        return max(self.weights, default=0)

    @property
    def rank(self) -> int:
        """Dimension of the horizontal layer."""
        return self.layer_dims[0] if self.layer_dims else 0

    @cached_property
    def layer_dims(self) -> tuple[int, ...]:
        return tuple(self.weights.count(k) for k in range(1, self.step + 1))

    @property
    def homogeneous_dimension(self) -> int:
        return sum(self.weights)

    def layer_indices(self, k: int) -> list[int]:
        return [i for i, w in enumerate(self.weights) if w == k]

    def index(self, label: str) -> int:
        try:
            return self.basis.index(label)
        except ValueError:
            raise UsageError(f"{label!r} is not a basis label of {self.name}") from None

    @cached_property
    def _terms(self) -> tuple[tuple[int, int, tuple[tuple[int, object], ...]], ...]:
        # antisymmetric completion of the raw table, keyed by i < j
        norm: dict[tuple[int, int], dict[int, object]] = {}
        for (i, j), rhs in self.structure.items():
            if i == j:
                continue
            if i < j:
                norm[(i, j)] = dict(rhs)
            elif (j, i) not in self.structure:
                norm[(j, i)] = {k: -c for k, c in rhs.items()}
        return tuple(
            (i, j, tuple((k, c) for k, c in sorted(rhs.items()) if c != 0))
            for (i, j), rhs in sorted(norm.items())
            if any(c != 0 for c in rhs.values())
        )

    @cached_property
    def structure_array(self) -> np.ndarray:
        """Dense float tensor ``C[i, j, k]`` of the antisymmetric structure constants."""
        c = np.zeros((self.n, self.n, self.n))
        for i, j, rhs in self._terms:
            for k, v in rhs:
                c[i, j, k] = float(v)
                c[j, i, k] = -float(v)
        return c

    @cached_property
    def _key(self):
        return (self.basis, self.weights, tuple((i, j, tuple((k, Fraction(v)) for k, v in rhs)) for i, j, rhs in self._terms))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, GradedAlgebra):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"GradedAlgebra({self.name!r}, dims={self.layer_dims})"

    # -- element helpers ------------------------------------------------------

    def element(self, coeffs: Iterable) -> "AlgebraElement":
        return AlgebraElement(self, tuple(coeffs))

    def zero(self) -> "AlgebraElement":
        return AlgebraElement(self, (Fraction(0),) * self.n)

    def basis_element(self, key: int | str) -> "AlgebraElement":
        i = self.index(key) if isinstance(key, str) else key
        return AlgebraElement(self, tuple(Fraction(int(j == i)) for j in range(self.n)))

    def __getitem__(self, label: str) -> "AlgebraElement":
        return self.basis_element(label)

    def horizontal(self, coeffs: Sequence) -> "AlgebraElement":
        """Element of the first layer with the given coordinates."""
        idx = self.layer_indices(1)
        if len(coeffs) != len(idx):
            raise UsageError(f"expected {len(idx)} horizontal coordinates, got {len(coeffs)}")
        out = [Fraction(0)] * self.n
        for i, c in zip(idx, coeffs):
            out[i] = c
        return AlgebraElement(self, tuple(out))

    # -- raw coefficient arithmetic ------------------------------------------

    def bracket_coeffs(self, a: Sequence, b: Sequence) -> list:
        out: list = [0] * self.n
        for i, j, rhs in self._terms:
            x = a[i] * b[j] - a[j] * b[i]
            if x:
                for k, c in rhs:
                    out[k] += c * x
        return out


@dataclass(frozen=True)
class AlgebraElement:
    """Coefficient vector over the ordered basis of ``algebra``.

    Also a group point in exponential coordinates of the first kind.
    """

    algebra: GradedAlgebra
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.algebra.n:
            raise UsageError(f"expected {self.algebra.n} coefficients, got {len(self.coeffs)}")

    def _same(self, other: "AlgebraElement") -> None:
        if not isinstance(other, AlgebraElement):
            raise UsageError(f"expected an AlgebraElement, got {type(other).__name__}")
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise UsageError(f"elements belong to different algebras ({self.algebra.name}, {other.algebra.name})")

    def __add__(self, other):
        self._same(other)
        return AlgebraElement(self.algebra, tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other):
        self._same(other)
        return AlgebraElement(self.algebra, tuple(x - y for x, y in zip(self.coeffs, other.coeffs)))

    def __neg__(self):
        return AlgebraElement(self.algebra, tuple(-x for x in self.coeffs))

    def __mul__(self, scalar):
        if isinstance(scalar, AlgebraElement):
            return NotImplemented
        return AlgebraElement(self.algebra, tuple(scalar * x for x in self.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.algebra == other.algebra and all(x == y for x, y in zip(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.algebra, self.coeffs))

    def __repr__(self):
        return f"<{self.algebra.name}: {format_element(self)}>"

    @property
    def is_exact(self) -> bool:
        return linalg.is_exact(self.coeffs)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_horizontal(self) -> bool:
        return all(c == 0 for c, w in zip(self.coeffs, self.algebra.weights) if w != 1)

    def layer(self, k: int) -> "AlgebraElement":
        """Projection onto layer ``k`` (all other coordinates zeroed)."""
        return AlgebraElement(
            self.algebra, tuple(c if w == k else 0 * c for c, w in zip(self.coeffs, self.algebra.weights))
        )

    def horizontal_coords(self) -> tuple:
        return tuple(c for c, w in zip(self.coeffs, self.algebra.weights) if w == 1)

    def to_float(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(float(c) for c in self.coeffs))

    def to_exact(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(Fraction(c) for c in self.coeffs))

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])


def format_scalar(c) -> str:
    if isinstance(c, float):
        return repr(c)
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_element(x: AlgebraElement) -> str:
    parts = []
    for c, label in zip(x.coeffs, x.algebra.basis):
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = -c if c < 0 else c
        body = label if mag == 1 else f"{format_scalar(mag)}*{label}"
        parts.append((sign, body))
    if not parts:
        return "0"
    head = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    return " ".join([head] + [f"{s} {b}" for s, b in parts[1:]])


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    kind: str
    where: tuple
    message: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.message}"


@dataclass
class ValidationReport:
    algebra: str
    structural: list[Finding] = field(default_factory=list)
    violations: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.structural and not self.violations

    def findings(self) -> list[Finding]:
        return self.structural + self.violations

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "ok": self.ok,
            "structural": [f.__dict__ | {"where": list(f.where)} for f in self.structural],
            "violations": [f.__dict__ | {"where": list(f.where)} for f in self.violations],
        }


def validate_algebra(alg: GradedAlgebra) -> ValidationReport:
    """Check antisymmetry, Jacobi, grading and stratification exactly.

    Structural problems (indices out of range, weights outside ``1..s``,
    brackets landing in the wrong layer) go to ``report.structural``; failed
    identities go to ``report.violations``.
    """
    rep = ValidationReport(alg.name)
    n, s, lab = alg.n, alg.step, alg.basis
    if len(alg.weights) != n:
        rep.structural.append(Finding("structure", (), f"{len(alg.weights)} weights for {n} basis vectors"))
        return rep
    for i, w in enumerate(alg.weights):
        if not isinstance(w, int) or w < 1:
            rep.structural.append(Finding("structure", (i,), f"weight {w!r} of {lab[i]} is not a positive integer"))
    for (i, j), rhs in alg.structure.items():
        bad = [x for x in (i, j, *rhs) if not (isinstance(x, int) and 0 <= x < n)]
        if bad:
            rep.structural.append(Finding("structure", (i, j), f"index {bad[0]!r} out of range 0..{n - 1}"))
    if rep.structural:
        return rep

    for (i, j), rhs in sorted(alg.structure.items()):
        for k, c in rhs.items():
            if c != 0 and alg.weights[k] != alg.weights[i] + alg.weights[j]:
                rep.structural.append(
                    Finding(
                        "grading",
                        (lab[i], lab[j]),
                        f"[{lab[i]},{lab[j]}] has a {lab[k]} component of weight {alg.weights[k]}, "
                        f"expected weight {alg.weights[i] + alg.weights[j]}",
                    )
                )

    for (i, j), rhs in sorted(alg.structure.items()):
        if i == j and any(c != 0 for c in rhs.values()):
            rep.violations.append(Finding("antisymmetry", (lab[i], lab[j]), f"[{lab[i]},{lab[i]}] is nonzero"))
        elif i < j and (j, i) in alg.structure:
            back = alg.structure[(j, i)]
            keys = set(rhs) | set(back)
            if any(rhs.get(k, 0) != -back.get(k, 0) for k in keys):
                rep.violations.append(
                    Finding("antisymmetry", (lab[i], lab[j]), f"[{lab[i]},{lab[j]}] != -[{lab[j]},{lab[i]}]")
                )

    basis = [alg.basis_element(i).coeffs for i in range(n)]
    br = alg.bracket_coeffs
    for i, j, k in itertools.combinations(range(n), 3):
        a, b, c = basis[i], basis[j], basis[k]
        t1 = br(a, br(b, c))
        t2 = br(b, br(c, a))
        t3 = br(c, br(a, b))
        res = [x + y + z for x, y, z in zip(t1, t2, t3)]
        if any(res):
            rep.violations.append(
                Finding("jacobi", (lab[i], lab[j], lab[k]), f"Jacobi residue {format_element(alg.element(res))}")
            )

    if s == 0:
        rep.violations.append(Finding("stratification", (), "algebra has no basis vectors"))
        return rep
    for k in range(1, s + 1):
        if not alg.layer_indices(k):
            rep.violations.append(Finding("stratification", (k,), f"layer {k} is empty"))
    first = alg.layer_indices(1)
    for k in range(1, s):
        vecs = [br(basis[a], basis[b]) for a in first for b in alg.layer_indices(k)]
        target = alg.layer_indices(k + 1)
        got = linalg.rank([[v[t] for t in target] for v in vecs]) if vecs and target else 0
        if got != len(target):
            rep.violations.append(
                Finding(
                    "stratification",
                    (k + 1,),
                    f"[g1, g{k}] spans {got} of the {len(target)} dimensions of layer {k + 1}",
                )
            )
    return rep


# ---------------------------------------------------------------------------
# brackets and the group law
# ---------------------------------------------------------------------------


def _check_pair(a: AlgebraElement, b: AlgebraElement) -> GradedAlgebra:
    if not isinstance(a, AlgebraElement) or not isinstance(b, AlgebraElement):
        raise UsageError("expected two AlgebraElements")
    a._same(b)
    return a.algebra


def bracket(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    alg = _check_pair(a, b)
    return AlgebraElement(alg, tuple(alg.bracket_coeffs(a.coeffs, b.coeffs)))


def ad_power(x: AlgebraElement, y: AlgebraElement, k: int) -> AlgebraElement:
    """``ad_x^k(y)``: ``y`` bracketed ``k`` times on the left by ``x``."""
    alg = _check_pair(x, y)
    if k < 0:
        raise UsageError("ad power must be nonnegative")
    v = list(y.coeffs)
    for _ in range(k):
        v = alg.bracket_coeffs(x.coeffs, v)
        if not any(v):
            break
    return AlgebraElement(alg, tuple(v))


def _words_coefficient(word: tuple[int, ...]) -> Fraction:
    """Coefficient of ``word`` (0 = X, 1 = Y) in log(e^X e^Y), free associative algebra."""
    n = len(word)

    def block_weight(i: int, j: int) -> Fraction | None:
        seg = word[i:j]
        if any(seg[t] == 1 and seg[t + 1] == 0 for t in range(len(seg) - 1)):
            return None
        a = seg.count(0)
        return Fraction(1, math.factorial(a) * math.factorial(len(seg) - a))

    # f[j][k]: summed weight of factorizations of word[:j] into k blocks X^a Y^b
    f = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
    f[0][0] = Fraction(1)
    for j in range(1, n + 1):
        for i in range(j):
            w = block_weight(i, j)
            if w is None:
                continue
            for k in range(1, j + 1):
                if f[i][k - 1]:
                    f[j][k] += f[i][k - 1] * w
    return sum((Fraction((-1) ** (k - 1), k) * f[n][k] for k in range(1, n + 1)), Fraction(0))


@lru_cache(maxsize=None)
def bch_terms(step: int) -> tuple[tuple[Fraction, tuple[int, ...]], ...]:
    """Dynkin form of the BCH series up to degree ``step``.

    Returns ``(coefficient, word)`` pairs such that
    ``log(e^X e^Y) = sum coefficient * [w1, [w2, ... [w_{N-1}, w_N]]]``
    with letters 0 = X and 1 = Y.
    """
    out = []
    for length in range(1, step + 1):
        for word in itertools.product((0, 1), repeat=length):
            if length >= 2 and word[-1] == word[-2]:
                continue
            c = _words_coefficient(word)
            if c:
                out.append((c / length, word))
    return tuple(out)


def _bch_eval(x, y, step, br, is_zero, scale_add):
    memo: dict[tuple[int, ...], object] = {}

    def nested(word):
        if word in memo:
            return memo[word]
        if len(word) == 1:
            v = (x, y)[word[0]]
        else:
            tail = nested(word[1:])
            v = None if tail is None else br((x, y)[word[0]], tail)
            if v is not None and is_zero(v):
                v = None
        memo[word] = v
        return v

    pieces = []
    for c, w in bch_terms(step):
        v = nested(w)
        if v is not None:
            pieces.append((c, v))
    return scale_add(pieces)


def bch_coeffs(alg: GradedAlgebra, p: Sequence, q: Sequence) -> list:
    if alg.step <= 1 or not alg._terms:
        return [a + b for a, b in zip(p, q)]

    def scale_add(pieces):
        out: list = [0] * alg.n
        for c, v in pieces:
            for i, x in enumerate(v):
                if x:
                    out[i] += c * x
        return out

    return _bch_eval(list(p), list(q), alg.step, alg.bracket_coeffs, lambda v: not any(v), scale_add)


def bch_product(p: AlgebraElement, q: AlgebraElement) -> AlgebraElement:
    """Group product of two points in exponential coordinates."""
    alg = _check_pair(p, q)
    out = bch_coeffs(alg, p.coeffs, q.coeffs)
    if p.is_exact and q.is_exact:
        out = [Fraction(v) for v in out]
    return AlgebraElement(alg, tuple(out))


def group_inverse(p: AlgebraElement) -> AlgebraElement:
    return -p


def dilate(r, p: AlgebraElement) -> AlgebraElement:
    """Intrinsic dilation: the weight-``w`` coordinate is scaled by ``r**w``.

    ``r == 0`` maps every point to the identity.
    """
    if r < 0:
        raise UsageError(f"dilation factor must be nonnegative, got {r}")
    return AlgebraElement(p.algebra, tuple(c * r**w for c, w in zip(p.coeffs, p.algebra.weights)))


def quasi_norm(p: AlgebraElement) -> float:
    """Box quasi-norm ``max_i |c_i|**(1/w_i)``; homogeneous of degree one."""
    return max((abs(float(c)) ** (1.0 / w) for c, w in zip(p.coeffs, p.algebra.weights) if c != 0), default=0.0)


# ---------------------------------------------------------------------------
# vectorised float versions (rows are points)
# ---------------------------------------------------------------------------


def bracket_batch(alg: GradedAlgebra, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    n = alg.n
    outer = (a[:, :, None] * b[:, None, :]).reshape(-1, n * n)
    return outer @ alg.structure_array.reshape(n * n, n)


def bch_batch(alg: GradedAlgebra, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if alg.step <= 1 or not alg._terms:
        return p + q

    def scale_add(pieces):
        out = np.zeros(np.broadcast_shapes(p.shape, q.shape))
        for c, v in pieces:
            out += float(c) * v
        return out

    return _bch_eval(
        p, q, alg.step, lambda a, b: bracket_batch(alg, a, b), lambda v: not np.any(v), scale_add
    )


def dilate_batch(alg: GradedAlgebra, r, p: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    w = np.asarray(alg.weights, dtype=float)
    return np.asarray(p, dtype=float) * np.power(r[..., None] if r.ndim else r, w)


def quasi_norm_batch(alg: GradedAlgebra, p: np.ndarray) -> np.ndarray:
    w = np.asarray(alg.weights, dtype=float)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    return np.max(np.abs(p) ** (1.0 / w), axis=1)
