"""Line-oriented text format for graded algebras.

    # Engel algebra
    algebra engel
    step 3
    layer 1: X0 X1
    layer 2: X2
    layer 3: X3
    bracket [X0,X1] = X2
    bracket [X0,X2] = 1*X3

Coefficients are integers or rationals ``p/q``; brackets that are not listed
are zero.  Every diagnostic carries a 1-based line and column.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import GradedAlgebra, format_scalar, validate_algebra

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<num>\d+(?:/\d+)?)|(?P<label>[A-Za-z_][A-Za-z0-9_']*)|(?P<op>[\[\],=:*+-])"
)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass
class AlgebraDocument:
    source: str
    algebra: GradedAlgebra | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.algebra is not None and not any(d.severity == "error" for d in self.diagnostics)

    @property
    def syntax_ok(self) -> bool:
        return not any(d.severity == "error" and not d.message.startswith("validation:") for d in self.diagnostics)


class _LineError(Exception):
    def __init__(self, column: int, message: str):
        super().__init__(message)
        self.column = column


def _tokenize(text: str, lineno: int) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise _LineError(pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos + 1))
        pos = m.end()
    return toks


class _Cursor:
    def __init__(self, toks, end_col):
        self.toks = toks
        self.i = 0
        self.end_col = end_col

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def col(self):
        t = self.peek()
        return t[2] if t else self.end_col

    def take(self, kind=None, value=None, what=None):
        t = self.peek()
        if t is None or (kind and t[0] != kind) or (value and t[1] != value):
            found = "end of line" if t is None else repr(t[1])
            raise _LineError(self.col(), f"expected {what or value or kind}, found {found}")
        self.i += 1
        return t

    def done(self):
        if self.peek() is not None:
            raise _LineError(self.col(), f"unexpected {self.peek()[1]!r}")


def parse_linear_combination(cur: _Cursor) -> list[tuple[Fraction, str, int]]:
    """``[sign] [coeff *] label {(+|-) [coeff *] label}`` or a lone ``0``."""
    t = cur.peek()
    if t and t[0] == "num" and t[1] == "0" and cur.i + 1 == len(cur.toks):
        cur.take()
        return []
    terms = []
    first = True
    while True:
        sign = Fraction(1)
        t = cur.peek()
        if t and t[0] == "op" and t[1] in "+-":
            cur.take()
            sign = Fraction(-1) if t[1] == "-" else Fraction(1)
        elif not first:
            break
        t = cur.peek()
        coeff = Fraction(1)
        if t and t[0] == "num":
            num = cur.take()
            p, _, q = num[1].partition("/")
            if q and int(q) == 0:
                raise _LineError(num[2], "zero denominator")
            coeff = Fraction(int(p), int(q) if q else 1)
            cur.take("op", "*")
        lab = cur.take("label", what="a basis label")
        terms.append((sign * coeff, lab[1], lab[2]))
        first = False
        if cur.peek() is None:
            break
    return terms


def parse_algebra_file(text: str) -> AlgebraDocument:
    doc = AlgebraDocument(text)
    diag = doc.diagnostics
    name = None
    step = None
    layers: dict[int, list[tuple[str, int, int]]] = {}
    layer_line: dict[int, int] = {}
    brackets: list[tuple[str, str, list, int, int]] = []  # a, b, terms, line, col
    header_line = 1

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        try:
            cur = _Cursor(_tokenize(body, lineno), len(body) + 1)
            kw = cur.take("label", what="a keyword")
            if kw[1] == "algebra":
                lab = cur.take("label", what="an algebra name")
                cur.done()
                if name is not None:
                    raise _LineError(kw[2], "algebra name given twice")
                name, header_line = lab[1], lineno
            elif kw[1] == "step":
                num = cur.take("num", what="the step")
                cur.done()
                if step is not None:
                    raise _LineError(kw[2], "step given twice")
                step = int(num[1].split("/")[0]) if "/" not in num[1] else None
                if step is None or step < 1:
                    raise _LineError(num[2], "step must be a positive integer")
            elif kw[1] == "layer":
                num = cur.take("num", what="a layer number")
                if "/" in num[1] or int(num[1]) < 1:
                    raise _LineError(num[2], "layer number must be a positive integer")
                k = int(num[1])
                cur.take("op", ":")
                labels = []
                while cur.peek() is not None:
                    lab = cur.take("label", what="a basis label")
                    labels.append((lab[1], lineno, lab[2]))
                if not labels:
                    raise _LineError(cur.col(), f"layer {k} lists no basis labels")
                if k in layers:
                    raise _LineError(kw[2], f"layer {k} declared twice (first on line {layer_line[k]})")
                layers[k] = labels
                layer_line[k] = lineno
            elif kw[1] == "bracket":
                cur.take("op", "[")
                a = cur.take("label", what="a basis label")
                cur.take("op", ",")
                b = cur.take("label", what="a basis label")
                cur.take("op", "]")
                cur.take("op", "=")
                terms = parse_linear_combination(cur)
                cur.done()
                brackets.append((a, b, terms, lineno, kw[2]))
            else:
                raise _LineError(kw[2], f"unknown keyword {kw[1]!r}")
        except _LineError as exc:
            diag.append(Diagnostic(lineno, exc.column, str(exc)))

    if name is None:
        diag.append(Diagnostic(1, 1, "missing 'algebra <name>' line"))
        name = "unnamed"
    top = max(layers, default=0)
    if step is None:
        diag.append(Diagnostic(header_line, 1, "missing 'step <s>' line"))
        step = top
    for k in range(1, max(step, top) + 1):
        if k not in layers:
            diag.append(Diagnostic(header_line, 1, f"layer {k} is not declared (step {step})"))
    for k in layers:
        if k > step:
            diag.append(Diagnostic(layer_line[k], 1, f"layer {k} exceeds the declared step {step}"))

    weight: dict[str, int] = {}
    where: dict[str, tuple[int, int]] = {}
    order: list[str] = []
    for k in sorted(layers):
        for lab, ln, col in layers[k]:
            if lab in weight:
                diag.append(Diagnostic(ln, col, f"duplicate basis label {lab!r} (first on line {where[lab][0]})"))
                continue
            weight[lab] = k
            where[lab] = (ln, col)
            order.append(lab)

    table: dict[tuple[str, str], dict[str, Fraction]] = {}
    seen: dict[frozenset, int] = {}
    bracket_line: dict[frozenset, int] = {}
    for (_, a, ca), (_, b, cb), terms, ln, col in brackets:
        bad = False
        for lab, c in ((a, ca), (b, cb)):
            if lab not in weight:
                diag.append(Diagnostic(ln, c, f"unknown basis label {lab!r}"))
                bad = True
        if bad:
            continue
        if a == b:
            diag.append(Diagnostic(ln, ca, f"[{a},{a}] is zero by antisymmetry and cannot be defined"))
            continue
        key = frozenset((a, b))
        if key in seen:
            diag.append(Diagnostic(ln, col, f"duplicate definition of [{a},{b}] (already defined on line {seen[key]})"))
            continue
        seen[key] = ln
        bracket_line[key] = ln
        rhs: dict[str, Fraction] = {}
        for c, lab, tc in terms:
            if lab not in weight:
                diag.append(Diagnostic(ln, tc, f"unknown basis label {lab!r}"))
                continue
            if weight[lab] != weight[a] + weight[b]:
                diag.append(
                    Diagnostic(ln, tc, f"[{a},{b}] has weight {weight[a] + weight[b]} but {lab} lies in layer {weight[lab]}")
                )
                continue
            rhs[lab] = rhs.get(lab, Fraction(0)) + c
        table[(a, b)] = {k: v for k, v in rhs.items() if v != 0}

    if any(d.severity == "error" for d in diag):
        return doc
    alg = GradedAlgebra.from_layers(name, [[lab for lab in order if weight[lab] == k] for k in range(1, step + 1)], table)
    doc.algebra = alg
    for f in validate_algebra(alg).findings():
        ln = header_line
        if f.kind in ("antisymmetry", "grading") and len(f.where) == 2:
            ln = bracket_line.get(frozenset(f.where), header_line)
        elif f.kind == "stratification" and f.where:
            ln = layer_line.get(f.where[0], header_line)
        diag.append(Diagnostic(ln, 1, f"validation: {f}"))
    return doc


def parse_element_expr(alg: GradedAlgebra, text: str):
    """Parse ``"X0 - 1/2*X3"`` (or ``"0"``) into an element of ``alg``."""
    from .errors import UsageError

    try:
        cur = _Cursor(_tokenize(text.strip(), 1), len(text.strip()) + 1)
        terms = parse_linear_combination(cur)
        cur.done()
    except _LineError as exc:
        raise UsageError(f"column {exc.column}: {exc}") from None
    coeffs = [Fraction(0)] * alg.n
    for c, lab, _ in terms:
        coeffs[alg.index(lab)] += c
    return alg.element(coeffs)


def format_algebra(alg: GradedAlgebra) -> str:
    """Serialise ``alg`` so that ``parse_algebra_file`` reproduces its structure tensor."""
    lines = [f"algebra {_name(alg.name)}", f"step {alg.step}"]
    for k in range(1, alg.step + 1):
        lines.append(f"layer {k}: " + " ".join(alg.basis[i] for i in alg.layer_indices(k)))
    for i, j, rhs in alg._terms:
        parts = []
        for k, c in rhs:
            c = Fraction(c)
            sign = "-" if c < 0 else "+"
            parts.append((sign, f"{format_scalar(abs(c))}*{alg.basis[k]}"))
        text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        text += "".join(f" {s} {t}" for s, t in parts[1:])
        lines.append(f"bracket [{alg.basis[i]},{alg.basis[j]}] = {text}")
    return "\n".join(lines) + "\n"


def _name(name: str) -> str:
    clean = re.sub(r"_+", "_", re.sub(r"[^A-Za-z0-9_']", "_", name)).strip("_") or "A"
    return clean if re.match(r"[A-Za-z_]", clean) else "A_" + clean
