"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the criterion lines are repeated
in the terminal summary.  ``python3 tests/test_acceptance.py`` runs the same
checks without pytest.
"""
from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np
from scipy.spatial import Delaunay

from carnot_kit.abnormality import (
    abnormal_directions_filiform,
    ad_chain_span,
    is_non_abnormal,
    scan_abnormal_directions,
    sphere_directions,
)
from carnot_kit.algebra import bch_product, dilate, group_inverse, validate_algebra
from carnot_kit.automorphy import GradedMapCandidate, extend_graded_map, graded_derivation_dimension
from carnot_kit.catalog import builtin, direct_product, product_pair, quotient
from carnot_kit.control import (
    ConeSpec,
    cone_property_check,
    endpoint_jacobian_rank,
    horizontal_pairing,
    sample_semigroup,
)

BUILTINS = (
    [f"abelian:{m}" for m in range(1, 5)]
    + ["heis", "engel"]
    + [f"filiform1:{s}" for s in range(2, 8)]
    + ["filiform2:5", "filiform2:7", "free:2,2", "free:2,3", "free:3,2", "cartan"]
)

RESULTS: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_01_validation_exactness():
    algebras = [builtin(name) for name in BUILTINS]
    t0 = time.perf_counter()
    bad = [(a.name, rep.findings()) for a in algebras if not (rep := validate_algebra(a)).ok]
    elapsed = time.perf_counter() - t0
    report(1, not bad and elapsed < 5.0,
           f"{len(algebras) - len(bad)}/{len(algebras)} builtins valid in {elapsed:.2f}s (limit 5s)"
           + (f"; failures {bad}" if bad else ""))


def test_02_filiform_abnormal_lines():
    problems = []
    for s in range(3, 8):
        alg = builtin(f"filiform1:{s}")
        if abnormal_directions_filiform(alg) != [alg["X1"]]:
            problems.append(alg.name)
    for s in (5, 7):
        alg = builtin(f"filiform2:{s}")
        if set(abnormal_directions_filiform(alg)) != {alg["X0"], alg["X1"]}:
            problems.append(alg.name)
    report(2, not problems, "first kind s=3..7 -> {X1}; second kind s=5,7 -> {X0, X1}"
           + (f"; mismatches {problems}" if problems else ""))


def test_03_cartan_all_abnormal():
    rep = scan_abnormal_directions(builtin("cartan"), 720)
    ok = rep.abnormal_count == 720 and max(rep.span_dims) <= 4
    report(3, ok, f"{rep.summary()}, max span_dim {max(rep.span_dims)} of 5")


def test_04_rank_bridge():
    t0 = time.perf_counter()
    mismatches = []
    total = 0
    for name in BUILTINS:
        alg = builtin(name)
        for u in sphere_directions(alg.rank, 72, seed=0):
            x = alg.horizontal(list(u)).to_float()
            total += 1
            jr = endpoint_jacobian_rank(x, pieces=8, h=1e-5)
            sd = ad_chain_span(x).dim
            if jr != sd:
                mismatches.append((name, tuple(np.round(u, 4)), jr, sd))
    elapsed = time.perf_counter() - t0
    report(4, not mismatches and elapsed < 60.0,
           f"{total - len(mismatches)}/{total} directions agree in {elapsed:.1f}s (limit 60s)"
           + (f"; first mismatches {mismatches[:5]}" if mismatches else ""))


def test_05_derivation_dimensions():
    expected = {f"filiform1:{s}": 3 for s in range(3, 8)} | {"filiform2:5": 2, "filiform2:7": 2}
    got = {name: graded_derivation_dimension(builtin(name)) for name in expected}
    report(5, got == expected, ", ".join(f"{k}={v}" for k, v in got.items()))


GRID = [Fraction(0), Fraction(1, 3), Fraction(-1, 3), Fraction(1, 2), Fraction(-1, 2),
        Fraction(1), Fraction(-1), Fraction(2), Fraction(-2)]


def test_06_automorphism_characterisation():
    exceptions = []
    cases = 0
    for name in [f"filiform1:{s}" for s in range(3, 8)] + ["filiform2:5", "filiform2:7"]:
        alg = builtin(name)
        first_kind = name.startswith("filiform1")
        for a, b, c in itertools.product(GRID, repeat=3):
            # lower-triangular: X0 -> a X0 + c X1, X1 -> b X1
            lower = extend_graded_map(GradedMapCandidate(alg, [[a, 0], [c, b]])).ok
            want = a != 0 and b != 0 and (first_kind or c == 0)
            # upper-triangular: X1 -> c X0 + b X1 leaves the abnormal X1 line
            upper = extend_graded_map(GradedMapCandidate(alg, [[a, c], [0, b]])).ok
            want_upper = a != 0 and b != 0 and c == 0
            cases += 2
            if lower != want:
                exceptions.append((name, "lower", a, b, c, lower))
            if upper != want_upper:
                exceptions.append((name, "upper", a, b, c, upper))
    report(6, not exceptions, f"{cases - len(exceptions)}/{cases} grid cases match, {len(exceptions)} exceptions"
           + (f"; first {exceptions[:3]}" if exceptions else ""))


def test_07_product_and_quotient():
    e = builtin("engel")
    p = direct_product(e, e)
    pair = product_pair(p, e["X0"], e["X0"])
    prod_ok = is_non_abnormal(pair).non_abnormal
    q, proj = quotient(e, [e["X3"]])
    quot_ok = q.layer_dims == (2, 1) and validate_algebra(q).ok
    image_ok = is_non_abnormal(proj(e["X0"])).non_abnormal
    report(7, prod_ok and quot_ok and image_ok,
           f"(X0, X0') non-abnormal in engel x engel: {prod_ok}; engel/span{{X3}} dims {q.layer_dims}; "
           f"image of X0 non-abnormal: {image_ok}")


def test_08_semigroup_invariant_and_coverage():
    worst = np.inf
    for name in ("heis", "engel", "filiform2:5"):
        alg = builtin(name)
        for k in range(8):
            nu = (np.cos(k * np.pi / 4), np.sin(k * np.pi / 4))
            cloud = sample_semigroup(alg, nu, count=10_000, seed=k)
            worst = min(worst, float(horizontal_pairing(alg, cloud.points, cloud.nu).min()))
    ab = builtin("abelian:2")
    cap = 2.0
    cloud = sample_semigroup(ab, (1.0, 0.0), count=100_000, magnitude_cap=cap, seed=0)
    hull = Delaunay(cloud.points)
    step = 2 * cap / 50
    centres = -cap + step * (np.arange(50) + 0.5)
    gx, gy = np.meshgrid(centres, centres)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    grid = grid[(grid[:, 0] >= 0) & (np.hypot(grid[:, 0], grid[:, 1]) <= cap)]
    covered = float(np.mean(hull.find_simplex(grid) >= 0))
    ok = worst >= -1e-12 and covered >= 0.99
    report(8, ok, f"min <nu, layer-1> = {worst:.3g} over 3x8x10^4 points; abelian(2) hull covers "
                  f"{100 * covered:.2f}% of {len(grid)} half-disk grid cells")


def _instances(alg, rng, wanted, max_tries=20_000):
    """Random exact point sets with a cap cone for which the direct check holds."""
    found, tries = [], 0
    while len(found) < wanted and tries < max_tries:
        tries += 1
        center = alg.element(tuple(Fraction(int(v)) for v in rng.integers(-2, 3, size=alg.n)))
        if center.is_zero():
            continue
        cone = ConeSpec.cap(center, float(rng.uniform(0.05, 0.6)))
        size = int(rng.integers(2, 7))
        gamma = [alg.element(tuple(Fraction(int(v), 2) for v in rng.integers(-6, 7, size=alg.n))) for _ in range(size)]
        if cone_property_check(gamma, cone).holds:
            found.append((gamma, cone))
    return found


def test_09_cone_duality():
    rng = np.random.default_rng(2024)
    counterexamples, checked = 0, 0
    for name in ("heis", "engel"):
        for gamma, cone in _instances(builtin(name), rng, 100):
            checked += 1
            if not cone_property_check(gamma, cone.inverse()).holds:
                counterexamples += 1
    report(9, checked == 200 and counterexamples == 0,
           f"{checked} instances with the direct cone property, {counterexamples} fail the inverse check")


def test_10_group_law_exactness():
    rng = np.random.default_rng(7)
    failures = []
    for name in BUILTINS:
        alg = builtin(name)
        for _ in range(100):
            p, q, r = (alg.element(tuple(Fraction(int(a), int(b)) for a, b in
                                         zip(rng.integers(-9, 10, alg.n), rng.integers(1, 7, alg.n))))
                       for _ in range(3))
            lam = Fraction(int(rng.integers(1, 10)), int(rng.integers(1, 10)))
            if bch_product(bch_product(p, q), r) != bch_product(p, bch_product(q, r)):
                failures.append((name, "associativity"))
            if not bch_product(p, group_inverse(p)).is_zero() or not bch_product(group_inverse(p), p).is_zero():
                failures.append((name, "inverse"))
            if dilate(lam, bch_product(p, q)) != bch_product(dilate(lam, p), dilate(lam, q)):
                failures.append((name, "dilation"))
    report(10, not failures, f"{len(BUILTINS)} builtins x 100 rational triples, {len(failures)} failures"
           + (f"; first {failures[:3]}" if failures else ""))


if __name__ == "__main__":
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_")]:
        try:
            fn()
        except AssertionError:
            pass
