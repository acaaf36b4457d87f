"""Command-line driver.

Exit status: 0 success (or the checked property holds), 1 the property is
violated (a witness is printed), 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import abnormality, automorphy, catalog, control
from .algebra import AlgebraElement, GradedAlgebra, format_element, validate_algebra
from .cloudio import export_cloud, load_points, parse_control, parse_scalar, parse_vector
from .dsl import format_algebra, parse_algebra_file, parse_element_expr
from .errors import CarnotKitError, UsageError
from .linalg import RANK_RTOL

OK, VIOLATED, USAGE = 0, 1, 2


class InputError(Exception):
    """Bad input that should end the run with status 2."""


def load_algebra(arg: str) -> GradedAlgebra:
    """A builtin name (``engel``, ``free:2,3``, ...) or a path to an algebra file."""
    path = Path(arg)
    if path.is_file():
        doc = parse_algebra_file(path.read_text())
        if not doc.ok:
            raise InputError("\n".join(f"{arg}:{d}" for d in doc.diagnostics))
        return doc.algebra
    if catalog.parse_builtin(arg) is None:
        raise InputError(
            f"{arg!r} is neither a file nor a builtin ({', '.join(catalog.BUILTIN_SYNTAX)})"
        )
    return catalog.builtin(arg)


def parse_element(alg: GradedAlgebra, text: str, horizontal: bool = False) -> AlgebraElement:
    """``"1,0"`` (coordinates, first layer only if ``horizontal``) or ``"X0 + 1/2*X1"``."""
    if any(ch.isalpha() for ch in text):
        el = parse_element_expr(alg, text)
        if horizontal and not el.is_horizontal():
            raise UsageError(f"{text!r} is not horizontal")
        return el
    if horizontal:
        return alg.horizontal(parse_vector(text, alg.rank))
    return alg.element(parse_vector(text, alg.n))


def _exact_or_float(rows) -> list:
    return [[c if isinstance(c, Fraction) else float(c) for c in r] for r in rows]


def _points(alg: GradedAlgebra, path: str) -> list[AlgebraElement]:
    return [alg.element(r) for r in _exact_or_float(load_points(path, alg))]


def _emit_algebra(alg: GradedAlgebra, out: str | None) -> None:
    text = format_algebra(alg)
    if out:
        Path(out).write_text(text)
        print(f"wrote {alg.name} ({alg.n} dims, layers {alg.layer_dims}) to {out}")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    path = Path(args.algebra)
    if path.is_file():
        doc = parse_algebra_file(path.read_text())
        for d in doc.diagnostics:
            print(f"{args.algebra}:{d}", file=sys.stderr)
        if not doc.syntax_ok or doc.algebra is None:
            return USAGE
        alg = doc.algebra
    else:
        alg = load_algebra(args.algebra)
    rep = validate_algebra(alg)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2, default=str))
    elif rep.ok:
        print(f"{alg.name}: valid stratified algebra, layer dims {alg.layer_dims}")
    else:
        for f in rep.findings():
            print(f"{alg.name}: {f}")
    return OK if rep.ok else VIOLATED


def cmd_info(args) -> int:
    alg = load_algebra(args.algebra)
    info = {
        "name": alg.name,
        "dimension": alg.n,
        "step": alg.step,
        "layer_dims": list(alg.layer_dims),
        "homogeneous_dimension": alg.homogeneous_dimension,
        "basis": list(alg.basis),
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        print(f"algebra: {alg.name}")
        print(f"dimension: {alg.n}")
        print(f"step: {alg.step}")
        print(f"layer dims: {', '.join(map(str, alg.layer_dims))}")
        print(f"homogeneous dimension Q: {alg.homogeneous_dimension}")
        print(f"basis: {' '.join(alg.basis)}")
    return OK


def cmd_abnormal(args) -> int:
    alg = load_algebra(args.algebra)
    if args.filiform_exact:
        lines = abnormality.abnormal_directions_filiform(alg)
        for x in lines:
            print(f"abnormal line: span{{{format_element(x)}}}")
        return OK
    rep = abnormality.scan_abnormal_directions(alg, args.scan, seed=args.seed, rtol=args.tol)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2))
        return OK
    print(rep.summary())
    if args.verbose:
        for i in rep.abnormal:
            coords = ", ".join(f"{c:.6g}" for c in rep.samples[i])
            print(f"  ({coords}) span_dim {rep.span_dims[i]}/{alg.n}")
    return OK


def cmd_autdim(args) -> int:
    print(automorphy.graded_derivation_dimension(load_algebra(args.algebra)))
    return OK


def cmd_autext(args) -> int:
    alg = load_algebra(args.algebra)
    m = alg.rank
    vals = parse_vector(args.matrix, m * m)
    if any(not isinstance(v, Fraction) for v in vals):
        raise UsageError("matrix entries must be integers or rationals p/q")
    mat = [vals[r * m:(r + 1) * m] for r in range(m)]
    res = automorphy.extend_graded_map(automorphy.GradedMapCandidate(alg, mat))
    if not res.ok:
        print(f"obstructed: {res.obstruction}")
        return VIOLATED
    print("graded automorphism; images of the basis:")
    for j, lab in enumerate(alg.basis):
        img = alg.element([row[j] for row in res.full_map])
        print(f"  {lab} -> {format_element(img)}")
    return OK


def cmd_endpoint(args) -> int:
    alg = load_algebra(args.algebra)
    print(format_element(control.endpoint(parse_control(alg, args.control))))
    return OK


def cmd_jacobian_rank(args) -> int:
    alg = load_algebra(args.algebra)
    x = parse_element(alg, args.direction, horizontal=True)
    rank = control.endpoint_jacobian_rank(x.to_float(), pieces=args.pieces, h=args.h, rtol=args.tol)
    span = abnormality.ad_chain_span(x).dim
    print(f"jacobian rank {rank} of {alg.n}; ad-chain span dim {span}")
    return OK


def cmd_sample(args) -> int:
    alg = load_algebra(args.algebra)
    nu = parse_element(alg, args.nu, horizontal=True).horizontal_coords()
    cloud = control.sample_semigroup(alg, nu, count=args.count, max_pieces=args.max_pieces,
                                     magnitude_cap=args.cap, seed=args.seed)
    fmt = args.format or ("json" if args.out.lower().endswith(".json") else "csv")
    export_cloud(cloud, args.out, fmt)
    print(f"wrote {len(cloud)} points of S_nu in {alg.name} to {args.out} ({fmt})")
    return OK


def parse_cone(alg: GradedAlgebra, spec: str) -> control.ConeSpec:
    """``cap:<point>@<radius>``, ``halfspace:<nu>[@closed]``, ``cloud:<path>@<tol>``; prefix ``inv:`` inverts."""
    inverse = spec.startswith("inv:")
    if inverse:
        spec = spec[4:]
    kind, _, rest = spec.partition(":")
    body, _, opt = rest.rpartition("@") if "@" in rest else (rest, "", "")
    if kind == "cap":
        if not opt:
            raise UsageError("cap cone needs a radius: cap:<point>@<radius>")
        cone = control.ConeSpec.cap(parse_element(alg, body), float(parse_scalar(opt)))
    elif kind == "halfspace":
        if opt not in ("", "closed", "open"):
            raise UsageError("halfspace option must be @open or @closed")
        cone = control.ConeSpec.halfspace(alg, parse_element(alg, body, horizontal=True).horizontal_coords(),
                                          strict=opt != "closed")
    elif kind == "cloud":
        if not opt:
            raise UsageError("cloud cone needs a tolerance: cloud:<path>@<tol>")
        cone = control.ConeSpec.cloud(alg, np.asarray(load_points(body, alg), dtype=float), float(parse_scalar(opt)))
    else:
        raise UsageError(f"unknown cone kind {kind!r}; expected cap, halfspace or cloud")
    return cone.inverse() if inverse else cone


def cmd_conecheck(args) -> int:
    alg = load_algebra(args.algebra)
    cone = parse_cone(alg, args.cone)
    res = control.cone_property_check(_points(alg, args.gamma), cone)
    if res.holds:
        print("cone property holds")
        return OK
    print(f"cone property violated: {res.detail}")
    print(f"witness: {res.witness[0]} {res.witness[1]}")
    return VIOLATED


def cmd_lipcheck(args) -> int:
    alg = load_algebra(args.algebra)
    x = parse_element(alg, args.direction, horizontal=True)
    res = control.lipschitz_cone_check(_points(alg, args.sigma), x, float(parse_scalar(args.beta)))
    if res.holds:
        print("intrinsic Lipschitz cone condition holds")
        return OK
    print(f"violated: {res.detail}")
    i, j, t = res.witness
    print(f"witness: {i} {j} t={t:.17g}")
    return VIOLATED


def cmd_product(args) -> int:
    a, b = load_algebra(args.first), load_algebra(args.second)
    _emit_algebra(catalog.direct_product(a, b, args.name), args.out)
    return OK


def cmd_quotient(args) -> int:
    alg = load_algebra(args.algebra)
    gens = [parse_element(alg, g) for chunk in args.ideal for g in chunk.split(";") if g.strip()]
    q, _ = catalog.quotient(alg, gens, args.name)
    _emit_algebra(q, args.out)
    return OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--tol", type=float, default=RANK_RTOL,
                        help=f"relative singular-value threshold for numerical rank (default {RANK_RTOL:g})")
    common.add_argument("--json", action="store_true", help="machine-readable output where supported")

    p = _Parser(prog="carnot-kit", description="Carnot algebra arithmetic and abnormality tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_, alg=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if alg:
            sp.add_argument("algebra", help="builtin name or algebra file")
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "parse and validate an algebra")
    add("info", cmd_info, "dimensions, step and homogeneous dimension")
    sp = add("abnormal", cmd_abnormal, "abnormal horizontal directions")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--scan", type=int, default=360, metavar="N", help="sample N unit directions (default 360)")
    mode.add_argument("--filiform-exact", action="store_true", help="enumerate abnormal lines of a filiform algebra")
    sp.add_argument("-v", "--verbose", action="store_true", help="list abnormal samples")
    add("autdim", cmd_autdim, "dimension of graded derivations")
    sp = add("autext", cmd_autext, "extend a first-layer matrix to a graded automorphism")
    sp.add_argument("--matrix", required=True, help="row-major entries a,b,c,d (column j = image of X_j)")
    sp = add("endpoint", cmd_endpoint, "end point of a piecewise-constant control")
    sp.add_argument("--control", required=True, help="pieces 'duration:v1,...,vm' separated by ';'")
    sp = add("jacobian-rank", cmd_jacobian_rank, "numerical rank of the end-point differential")
    sp.add_argument("--direction", required=True)
    sp.add_argument("--pieces", type=int, default=8)
    sp.add_argument("--h", type=float, default=control.FD_STEP, help="finite-difference step")
    sp = add("sample", cmd_sample, "sample the semigroup of horizontal normal nu")
    sp.add_argument("--nu", required=True)
    sp.add_argument("--count", type=int, default=10_000)
    sp.add_argument("--max-pieces", type=int, default=8)
    sp.add_argument("--cap", type=float, default=2.0, help="quasi-norm cap of the samples")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=["csv", "json"])
    sp = add("conecheck", cmd_conecheck, "outer cone property of a point set")
    sp.add_argument("--gamma", required=True, help="CSV or JSON point file")
    sp.add_argument("--cone", required=True, help="cap:<p>@<r> | halfspace:<nu>[@closed] | cloud:<file>@<tol>; prefix inv:")
    sp = add("lipcheck", cmd_lipcheck, "intrinsic Lipschitz cone condition around exp(tX)")
    sp.add_argument("--sigma", required=True)
    sp.add_argument("--direction", required=True)
    sp.add_argument("--beta", required=True)
    sp = add("product", cmd_product, "direct product of two algebras", alg=False)
    sp.add_argument("first")
    sp.add_argument("second")
    sp.add_argument("--name")
    sp.add_argument("--out")
    sp = add("quotient", cmd_quotient, "quotient by a graded ideal")
    sp.add_argument("--ideal", action="append", required=True, help="generators, e.g. 'X3' or '0,0,0,1'; ';'-separated")
    sp.add_argument("--name")
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (InputError, CarnotKitError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
