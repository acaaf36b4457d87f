from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from carnot_kit.abnormality import ad_chain_span
from carnot_kit.algebra import bch_batch, bch_product, dilate_batch, quasi_norm, quasi_norm_batch
from carnot_kit.catalog import builtin
from carnot_kit.control import (
    ConeSpec,
    HorizontalControl,
    cone_contains,
    cone_property_check,
    endpoint,
    endpoint_batch,
    endpoint_jacobian,
    endpoint_jacobian_rank,
    equilibrate_layers,
    horizontal_pairing,
    interior_membership_heuristic,
    lipschitz_cone_check,
    sample_semigroup,
)
from carnot_kit.errors import UsageError


# --- end-point map -----------------------------------------------------------


def test_constant_control_ends_at_exp(engel):
    x = engel.horizontal([Fraction(2), Fraction(-1)])
    assert endpoint(HorizontalControl.constant(x)) == x
    assert endpoint(HorizontalControl.constant(x, Fraction(1, 3))) == x * Fraction(1, 3)


def test_concatenation_is_group_product(engel):
    a = HorizontalControl(engel, ((1, engel["X0"]), (Fraction(1, 2), engel["X1"])))
    b = HorizontalControl(engel, ((2, engel["X1"] - engel["X0"]),))
    assert endpoint(a + b) == bch_product(endpoint(a), endpoint(b))


@settings(max_examples=30, deadline=None)
@given(lam=st.fractions(min_value=Fraction(1, 5), max_value=5, max_denominator=7))
def test_reparametrization_keeps_endpoint(lam):
    alg = builtin("filiform2:5")
    h = HorizontalControl(alg, ((Fraction(1, 2), alg["X0"]), (1, alg["X1"] * 3), (2, alg["X0"] - alg["X1"])))
    assert endpoint(h.reparametrized(lam)) == endpoint(h)


def test_batch_endpoint_matches_exact():
    alg = builtin("cartan")
    rng = np.random.default_rng(0)
    dur = rng.integers(0, 3, size=(10, 4))
    dirs = rng.integers(-2, 3, size=(10, 4, 2))
    out = endpoint_batch(alg, dur, dirs)
    for row, d, u in zip(out, dur, dirs):
        pieces = tuple((int(t), alg.horizontal([Fraction(int(c)) for c in v])) for t, v in zip(d, u) if t > 0)
        exact = endpoint(HorizontalControl(alg, pieces)) if pieces else alg.zero()
        np.testing.assert_allclose(row, [float(c) for c in exact.coeffs], atol=1e-12)


def test_control_validation(engel):
    with pytest.raises(UsageError):
        HorizontalControl(engel, ((1, engel["X2"]),))
    with pytest.raises(UsageError):
        HorizontalControl(engel, ((0, engel["X0"]),))


# --- Jacobian ----------------------------------------------------------------


def test_heisenberg_jacobian_matches_exact_difference(heis):
    # End is quadratic in the control for a step-2 algebra, so the exact
    # central difference with step 1 equals the derivative.
    K = 4
    x = heis.horizontal([Fraction(1, 3), Fraction(2)])
    jac = endpoint_jacobian(x.to_float(), pieces=K)
    col = 0
    for k in range(K):
        for a in range(2):
            def end(sign):
                pieces = []
                for j in range(K):
                    u = list(x.horizontal_coords())
                    if j == k:
                        u[a] += sign
                    pieces.append((Fraction(1, K), heis.horizontal(u)))
                return endpoint(HorizontalControl(heis, tuple(pieces)))
            exact = (end(1) - end(-1)) * Fraction(1, 2)
            np.testing.assert_allclose(jac[:, col], [float(c) for c in exact.coeffs], atol=1e-9)
            col += 1


@pytest.mark.parametrize("name", ["heis", "engel", "cartan", "filiform1:5", "filiform2:5", "free:3,2"])
def test_jacobian_rank_matches_ad_chain(name):
    alg = builtin(name)
    rng = np.random.default_rng(3)
    dirs = [alg.basis_element(i) for i in alg.layer_indices(1)]
    dirs += [alg.horizontal(list(rng.standard_normal(alg.rank))) for _ in range(6)]
    for x in dirs:
        assert endpoint_jacobian_rank(x.to_float()) == ad_chain_span(x.to_float()).dim


def test_equilibration_preserves_rank_and_drops_residue(engel):
    jac = endpoint_jacobian(engel["X0"].to_float())
    eq = equilibrate_layers(engel, jac)
    assert np.linalg.matrix_rank(eq) == np.linalg.matrix_rank(jac)
    for k in (1, 2, 3):
        assert np.linalg.norm(eq[engel.layer_indices(k)]) == pytest.approx(1.0)
    fake = jac.copy()
    fake[engel.layer_indices(3)] = 1e-16
    assert not equilibrate_layers(engel, fake)[engel.layer_indices(3)].any()


def test_jacobian_input_checks(engel):
    with pytest.raises(UsageError):
        endpoint_jacobian_rank(engel["X0"].to_float(), pieces=2)
    with pytest.raises(UsageError):
        endpoint_jacobian(engel["X0"].to_float(), h=0.1)


# --- semigroup sampling ------------------------------------------------------


@pytest.mark.parametrize("name", ["heis", "engel", "filiform2:5"])
def test_samples_lie_in_closed_half_space(name):
    alg = builtin(name)
    nu = (np.cos(0.7), np.sin(0.7))
    cloud = sample_semigroup(alg, nu, count=2000, seed=5)
    assert horizontal_pairing(alg, cloud.points, cloud.nu).min() >= -1e-12
    assert quasi_norm_batch(alg, cloud.points).max() <= 2.0 + 1e-9


def test_stored_controls_reproduce_points(engel):
    cloud = sample_semigroup(engel, (1, 0), count=50, seed=2)
    for i in range(0, 50, 7):
        got = endpoint(cloud.control(i))
        np.testing.assert_allclose([float(c) for c in got.coeffs], cloud.points[i], rtol=1e-9, atol=1e-12)
        for d, u in cloud.control(i).pieces:
            assert float(u.coeffs[0]) >= 0


def test_sampling_is_seed_deterministic(heis):
    a = sample_semigroup(heis, (0, 1), count=100, seed=11)
    b = sample_semigroup(heis, (0, 1), count=100, seed=11)
    c = sample_semigroup(heis, (0, 1), count=100, seed=12)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_empty_cloud(heis):
    cloud = sample_semigroup(heis, (1, 0), count=0)
    assert len(cloud) == 0 and cloud.points.shape == (0, 3)


@pytest.mark.parametrize("name", ["heis", "engel"])
def test_inverse_of_semigroup_is_semigroup_of_opposite_normal(name):
    # S_{-nu} = S_nu^{-1}: compare coordinate marginals
    alg = builtin(name)
    nu = (0.6, 0.8)
    inv = sample_semigroup(alg, nu, count=4000, seed=1).inverted()
    opp = sample_semigroup(alg, tuple(-c for c in nu), count=4000, seed=2)
    assert inv.nu == pytest.approx(opp.nu)
    for k in range(alg.n):
        assert ks_2samp(inv.points[:, k], opp.points[:, k]).pvalue > 1e-3


def test_inverted_controls_end_at_inverse(engel):
    cloud = sample_semigroup(engel, (1, 0), count=10, seed=4)
    inv = cloud.inverted()
    for i in range(10):
        end = endpoint(inv.control(i))
        np.testing.assert_allclose([float(c) for c in end.coeffs], -cloud.points[i], atol=1e-10)


def test_interior_heuristic(engel):
    cloud = sample_semigroup(engel, (1, 0), count=20000, seed=1)
    # X0 is non-abnormal and pairs positively with nu
    assert interior_membership_heuristic(engel["X0"].to_float(), cloud) == "inside"
    assert interior_membership_heuristic((engel["X0"] * -1).to_float(), cloud) == "inconclusive"


def test_interior_heuristic_abelian():
    ab = builtin("abelian:2")
    cloud = sample_semigroup(ab, (1, 0), count=2000, seed=0)
    assert interior_membership_heuristic(ab.horizontal([1.0, 0.0]), cloud) == "inside"
    assert interior_membership_heuristic(ab.horizontal([0.0, 1.0]), cloud) == "inconclusive"


def test_sampler_rejects_bad_arguments(heis):
    with pytest.raises(UsageError):
        sample_semigroup(heis, (0, 0))
    with pytest.raises(UsageError):
        sample_semigroup(heis, (1, 0, 0))
    with pytest.raises(UsageError):
        sample_semigroup(heis, (1, 0), max_pieces=0)


# --- cones -------------------------------------------------------------------


def test_cap_is_dilation_invariant_and_open(heis):
    cone = ConeSpec.cap(heis["Z"], 0.5)
    assert cone_contains(cone, heis.element((0, 0, 7.0)))
    assert not cone_contains(cone, heis.element((0, 0, -7.0)))
    assert not cone_contains(cone, heis.zero())
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((200, 3))
    base = cone.contains_batch(pts)
    for r in (0.1, 3.0, 40.0):
        np.testing.assert_array_equal(cone.contains_batch(dilate_batch(heis, r, pts)), base)


def test_halfspace_and_inverse(heis):
    open_ = ConeSpec.halfspace(heis, (1, 0))
    closed = ConeSpec.halfspace(heis, (1, 0), strict=False)
    p = heis.element((0.0, 1.0, 0.0))
    assert not cone_contains(open_, p) and cone_contains(closed, p)
    q = heis.element((1.0, 0.0, 0.0))
    assert cone_contains(open_, q) and not cone_contains(open_.inverse(), q)
    assert open_.inverse().inverse() == open_


def test_cloud_cone(engel):
    cloud = sample_semigroup(engel, (1, 0), count=500, seed=0)
    cone = ConeSpec.cloud(engel, cloud.points, 0.05)
    assert cone.contains_batch(cloud.points).all()
    assert not cone_contains(cone, (engel["X0"] * -1).to_float())


def _greedy_cone_set(alg, cone, n, seed):
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(20 * n):
        r = alg.element(tuple(Fraction(int(c), 4) for c in rng.integers(-12, 13, size=alg.n)))
        ok = all(
            not cone_contains(cone, bch_product(-p, r)) and not cone_contains(cone, bch_product(-r, p))
            for p in pts
        )
        if ok and r not in pts:
            pts.append(r)
        if len(pts) == n:
            break
    return pts


def test_cone_property_check_and_witness(heis):
    cone = ConeSpec.cap(heis["Z"], 0.6)
    gamma = _greedy_cone_set(heis, cone, 15, seed=0)
    assert cone_property_check(gamma, cone).holds
    p = gamma[0]
    bad = gamma + [bch_product(p, heis["Z"] * 2)]
    res = cone_property_check(bad, cone)
    assert not res.holds and res.witness == (0, len(bad) - 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), radius=st.floats(0.2, 1.2))
def test_cone_duality(seed, radius):
    alg = builtin("engel")
    rng = np.random.default_rng(seed)
    center = alg.element(tuple(Fraction(int(c)) for c in rng.integers(-3, 4, size=alg.n)))
    if center.is_zero():
        return
    cone = ConeSpec.cap(center, radius)
    pts = [alg.element(tuple(Fraction(int(c), 2) for c in rng.integers(-6, 7, size=alg.n))) for _ in range(8)]
    if cone_property_check(pts, cone).holds:
        assert cone_property_check(pts, cone.inverse()).holds


def _safe_radius(alg, x, cone, trials=4000, seed=0):
    """Largest eps (by sampling) with exp(X) B(0,eps) and B(0,eps) exp(X) inside the cone."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((trials, alg.n))
    w = dilate_batch(alg, 1.0 / quasi_norm_batch(alg, w), w)
    xa = x.as_array()[None, :]
    eps = 1.0
    while eps > 1e-4:
        ball = dilate_batch(alg, eps * rng.random(trials), w)
        if cone.contains_batch(bch_batch(alg, xa, ball)).all() and cone.contains_batch(bch_batch(alg, ball, xa)).all():
            return eps
        eps /= 1.5
    return 0.0


def test_open_cap_cone_set_is_lipschitz_graph(heis):
    # a set with the cone property for an open cap around exp(X) is an
    # intrinsic Lipschitz graph over the line exp(tX) with beta ~ eps
    x = heis["X1"].to_float()
    cone = ConeSpec.cap(heis["X1"], 0.8)
    eps = _safe_radius(heis, x, cone)
    assert eps > 0
    gamma = _greedy_cone_set(heis, cone, 20, seed=3)
    assert cone_property_check(gamma, cone).holds
    assert lipschitz_cone_check(gamma, x, beta=eps / 2 / quasi_norm(x)).holds


def test_lipschitz_violation_has_witness(heis):
    x = heis["X1"]
    p = heis.element((Fraction(1), Fraction(2), Fraction(-1)))
    q = bch_product(p, x * Fraction(3, 2))
    res = lipschitz_cone_check([p, q], x, beta=0.1)
    assert not res.holds
    i, j, t = res.witness
    assert (i, j) in {(0, 1), (1, 0)} and abs(abs(t) - 1.5) < 1e-3


def test_lipschitz_input_checks(heis):
    with pytest.raises(UsageError):
        lipschitz_cone_check([], heis["Z"], 0.5)
    with pytest.raises(UsageError):
        lipschitz_cone_check([], heis["X1"], 0)


# --- examples from the operation contracts ---------------------------------


def test_back_and_forth_control_returns_to_identity(engel):
    x = engel["X0"] + engel["X1"] * Fraction(1, 3)
    assert endpoint(HorizontalControl(engel, ((1, x), (1, -x)))).is_zero()
    assert endpoint(HorizontalControl(engel)).is_zero()


def test_heisenberg_square_holonomy(heis):
    x1, x2 = heis["X1"], heis["X2"]
    end = endpoint(HorizontalControl(heis, ((1, x1), (1, x2), (1, -x1), (1, -x2))))
    # four-fold BCH: the horizontal part cancels and the enclosed area is 1
    assert end == heis["Z"]


def test_cartan_jacobian_rank_is_deficient():
    c = builtin("cartan")
    rng = np.random.default_rng(8)
    for _ in range(10):
        assert endpoint_jacobian_rank(c.horizontal(list(rng.standard_normal(2)))) <= 4


def test_heisenberg_cloud_reaches_every_vertical_quadrant(heis):
    cloud = sample_semigroup(heis, (1, 0), count=10_000, seed=0)
    assert cloud.points[:, 0].min() >= 0
    signs = {(np.sign(p[1]), np.sign(p[2])) for p in cloud.points}
    assert {(1, 1), (1, -1), (-1, 1), (-1, -1)} <= signs


def test_abelian_cloud_fills_the_half_plane():
    ab = builtin("abelian:2")
    cloud = sample_semigroup(ab, (1, 0), count=5000, seed=1)
    assert cloud.points[:, 0].min() >= 0
    angles = np.arctan2(cloud.points[:, 1], cloud.points[:, 0])
    assert angles.min() < -1.5 and angles.max() > 1.5


def test_cone_contract_examples(heis):
    cap = ConeSpec.cap(heis.element((1, 2, 3)), 0.3)
    assert cone_contains(cap, heis.element((1, 2, 3)))
    for cone in (cap, ConeSpec.halfspace(heis, (1, 0), strict=False)):
        assert not cone_contains(cone, heis.zero())


def test_abelian_line_and_halfspace():
    ab = builtin("abelian:2")
    cone = ConeSpec.halfspace(ab, (1, 0))
    line = [ab.horizontal([Fraction(0), Fraction(k)]) for k in range(-3, 4)]
    assert cone_property_check(line, cone).holds
    moved = list(line)
    moved[4] = ab.horizontal([Fraction(1, 2), Fraction(0)])
    res = cone_property_check(moved, cone)
    assert not res.holds and 4 in res.witness


def test_abelian_lipschitz_examples():
    ab = builtin("abelian:2")
    axis = [ab.horizontal([0.0, float(k)]) for k in range(-3, 4)]
    assert lipschitz_cone_check(axis, ab.horizontal([1.0, 0.0]), 0.5).holds
    x = ab.horizontal([Fraction(1), Fraction(2)])
    res = lipschitz_cone_check([ab.zero(), x], x, 1e-3)
    assert not res.holds and abs(abs(res.witness[2]) - 1) < 1e-6
