import math
from fractions import Fraction

import numpy as np
import pytest

from flagmeasures.counterexample import (
    DirectionSet,
    LiftConfig,
    TestSetA,
    a_shell_mass,
    build_lift_polytope,
    classify,
    curvature_B0,
    curvature_B0_mc,
    direction_membership,
    equivariance_error,
    hausdorff_nested,
    hausdorff_to_K,
    invariant_function,
    lattice_points,
    lift_points,
    limit_curvature_B0,
    run_counterexample,
    separating_function,
    support_K,
    vertical_bound_check,
)
from flagmeasures.euclid import DomainError, Subspace, rotation_about_axis, sphere_points
from flagmeasures.flagmeasure import Valuation, evaluate_valuation
from flagmeasures.polytope import brute_force_facets

THETA = rotation_about_axis([0, 0, 1], math.pi / 4)


@pytest.fixture(scope="module")
def lifts():
    return {t: build_lift_polytope(LiftConfig(3, t)) for t in ("1/8", "1/16", "1/32")}


def test_config_validation():
    with pytest.raises(DomainError):
        LiftConfig(3, "1/4")
    with pytest.raises(DomainError):
        LiftConfig(2, "1/8")
    with pytest.raises(DomainError):
        LiftConfig(3, 0)
    assert LiftConfig(3, "1/4", allow_coarse=True).t == Fraction(1, 4)


def test_lattice_counts():
    assert len(lattice_points(3, Fraction(1, 8))) == 49
    assert len(lattice_points(3, Fraction(1, 4))) == 13
    pts = lift_points(LiftConfig(3, "1/4", allow_coarse=True))
    assert len(pts) == 22
    for p in pts:
        assert abs(p[2]) == 1 - p[0] ** 2 - p[1] ** 2


def test_coarse_hull_matches_brute_force():
    cfg = LiftConfig(3, "1/4", allow_coarse=True)
    pts = lift_points(cfg)
    P = build_lift_polytope(cfg)
    ints = [[int(c * 16) for c in p] for p in pts]
    verts = set()
    for _, _, ids in brute_force_facets(ints):
        verts |= set(ids)
    # a point is a vertex iff it is not a convex combination of the others
    assert P.n_vertices <= len(verts)
    assert set(P.vertices) <= {pts[i] for i in verts}
    assert P.euler_characteristic() == 1


def test_support_function_of_K():
    U = np.array([[0, 0, 1.0], [1.0, 0, 0], [0.6, 0, 0.8]])
    h = support_K(U)
    assert h[0] == pytest.approx(1.0)
    assert h[1] == pytest.approx(1.0)
    # |v| = 0.6 <= 2|w| = 1.6: |v|^2/(4|w|) + |w|
    assert h[2] == pytest.approx(0.36 / 3.2 + 0.8)


def test_hausdorff_decreasing(lifts):
    dK = [hausdorff_to_K(lifts[t], rng=1) for t in ("1/8", "1/16", "1/32")]
    assert dK[0] > dK[1] > dK[2] > 0
    dn = [hausdorff_nested(lifts[t], lifts["1/32"]) for t in ("1/8", "1/16")]
    assert dn[0] > dn[1] > 0
    assert hausdorff_nested(lifts["1/32"], lifts["1/32"]) == pytest.approx(0.0, abs=1e-12)


def test_direction_set():
    D = DirectionSet(3, 1)
    assert len(D) == 2
    D4 = DirectionSet(4, 2)
    assert len(D4) == 3
    with pytest.raises(DomainError):
        DirectionSet(3, 2)


def test_vertical_bound(lifts):
    P = lifts["1/8"]
    rep = vertical_bound_check(P, 1)
    assert rep["holds"] and rep["faces"] > 0
    rep_q = vertical_bound_check(P.transformed(THETA), 1)
    assert rep_q["max_vertical"] == pytest.approx(rep["max_vertical"], abs=1e-12)


def test_direction_membership(lifts):
    P = lifts["1/8"]
    assert direction_membership(P, 1)["fraction"] == 1.0
    assert direction_membership(P.transformed(THETA), 1)["fraction"] == 0.0


def test_test_set_A_and_rotation():
    A = TestSetA(3, 1)
    horiz = np.array([[[1.0], [0.0], [0.0]], [[0.0], [1.0], [0.0]]])
    assert A.contains(horiz).all()
    diag = np.array([[[1.0], [1.0], [0.0]]]) / math.sqrt(2)
    assert not A.contains(diag).any()
    steep = np.array([[[0.5], [0.0], [math.sqrt(3) / 2]]])
    assert not A.contains(steep).any()
    probe = A.probe_rotation(THETA, n=10_000, rng=2)
    assert probe["members"] == 10_000
    assert probe["fraction"] == 0.0


def test_separating_function_values():
    f = separating_function(1)
    u = np.array([[0.0, 0.0, 1.0]])
    # U = L^perp with L = e_1 horizontal
    assert f.evaluate(u, np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]))[0] == pytest.approx(1.0)
    # L rotated by pi/4 about e_3
    Lp = Subspace(np.array([[1.0, 1.0, 0.0]]).T / math.sqrt(2)).complement().basis
    assert f.evaluate(u, Lp[None])[0] == 0.0
    lo, hi = f.probe_bounds(3, 2, n=10_000, rng=3)
    assert 0.0 <= lo and hi <= 1.0 + 1e-12
    with pytest.raises(DomainError):
        f.evaluate(u, np.zeros((1, 3, 1)))


def test_separating_function_lipschitz():
    f = separating_function(1)
    gen = np.random.default_rng(4)
    n = 10_000
    u = sphere_points(n, np.eye(3), gen)
    from flagmeasures.euclid import haar_bases_containing

    B = haar_bases_containing(u, 2, gen)
    # nearby flags: small rotation of the whole frame
    angle = 1e-4
    R = rotation_about_axis(gen.standard_normal(3), angle).matrix
    v1 = f.evaluate(u, B)
    v2 = f.evaluate(u @ R.T, np.einsum("de,nek->ndk", R, B))
    # the bump profile has slope below 2 per unit of its argument
    lip = 2 * 2 / (math.pi / 16) * 4
    assert np.max(np.abs(v1 - v2)) <= lip * angle


def test_invariant_function_is_invariant(lifts):
    f = invariant_function(1)
    phi = Valuation(1, "flag_continuous", f)
    P = lifts["1/8"]
    a = evaluate_valuation(P, phi).value
    b = evaluate_valuation(P.transformed(THETA), phi).value
    assert a == pytest.approx(b, rel=1e-9)


def test_symmetries_of_phi(lifts):
    phi = Valuation(1, "flag_continuous", separating_function(1))
    P = lifts["1/8"]
    base = evaluate_valuation(P, phi).value
    reflect = P.transformed(rotation_about_axis([0, 0, 1], math.pi))
    swap = P.transformed(rotation_about_axis([0, 0, 1], math.pi / 2))
    for Q in (reflect, swap):
        assert evaluate_valuation(Q, phi).value == pytest.approx(base, rel=1e-9)


def test_equivariance_exact(lifts):
    assert equivariance_error(lifts["1/8"], 1, THETA) <= 1e-10


def test_curvature_routes_and_limit(lifts):
    vals = [curvature_B0(lifts[t], 1, rng=5).value for t in ("1/8", "1/16", "1/32")]
    lim = limit_curvature_B0()
    assert lim == pytest.approx(math.pi * (0.25 * math.log(1.25) + 1 / 16))
    assert all(v > 0 for v in vals)
    assert abs(vals[2] - lim) < abs(vals[1] - lim) < abs(vals[0] - lim)
    mc = curvature_B0_mc(lifts["1/8"], 1, N=20_000, rng=6)
    assert mc.agrees(vals[0], k=3.5)


def test_a_shell_dominates_curvature(lifts):
    for t in ("1/8", "1/16"):
        P = lifts[t]
        shell = a_shell_mass(P, 1, rng=7)
        c = curvature_B0(P, 1, rng=8)
        assert shell.value >= 2 * c.value - 3 * math.hypot(shell.se, 2 * c.se)


def test_classify_cases():
    res = run_counterexample(1, ["1/8"], N=1000, rng=9)
    assert res.status == "inconclusive"
    st, reasons = classify(res.rows, control=False)
    assert st == "inconclusive" and reasons


def test_run_counterexample_short_grid():
    res = run_counterexample(1, ["1/8", "1/16"], N=10_000, rng=10)
    assert res.status == "success", res.reasons
    for r in res.rows:
        assert r.gap.value > 5 * r.gap.se
        assert r.membership["fraction"] == 1.0
        assert r.rotated_membership["fraction"] == 0.0
    d = res.as_dict()
    assert d["rows"][0]["t"] == "1/8"
    ctrl = run_counterexample(1, ["1/8", "1/16"], N=10_000, rng=10, control=True)
    assert ctrl.status == "null-control passed"
