import math
from fractions import Fraction

import numpy as np
import pytest

from flagmeasures.euclid import (
    DomainError,
    RngStream,
    Subspace,
    binom,
    haar_bases_containing,
    random_rotation,
    sphere_area,
    sphere_points,
)
from flagmeasures.flagmeasure import (
    FlagFunction,
    Valuation,
    alt_representation,
    area_marginal,
    cap_indicator,
    constant,
    coordinate,
    det_squared_to,
    evaluate_valuation,
    flag_curvature_measure,
    integrate,
    lift,
    psi_direct,
    psi_integrate,
    psi_link,
    spatial,
    tau,
    theta_polytope,
    transform_T,
    transform_constant_check,
)
from flagmeasures.polytope import box, build, cube, simplex
from flagmeasures.stats import combined_z

E3 = np.eye(3)


def box_intrinsic(sides):
    """Elementary symmetric functions of the side lengths."""
    e = [1.0, 0.0, 0.0, 0.0]
    for a in sides:
        e = [e[0]] + [e[i] + a * e[i - 1] for i in range(1, 4)]
    return e


def simplex_intrinsic():
    # corner simplex: V1 = sum over edges of length * exterior angle / (2 pi)
    v1_axis = 3 * 1.0 * (math.pi / 2) / (2 * math.pi)
    v1_slant = 3 * math.sqrt(2) * (math.pi - math.acos(1 / math.sqrt(3))) / (2 * math.pi)
    return [1.0, v1_axis + v1_slant, (1.5 + math.sqrt(3) / 2) / 2, 1 / 6]


def mixed_plane_function():
    """A non-invariant flag function on F(3, 2)."""
    det = det_squared_to(Subspace(E3[:, :2]))
    return FlagFunction(lambda u, B: (1 + u[:, 0] + u[:, 1] ** 2) * det.evaluate(u, B), "mixed")


# -- tau --------------------------------------------------------------------

def test_tau_cube_atoms():
    mu = tau(cube(3), 1)
    assert len(mu.atoms) == 12
    assert all(a.weight == pytest.approx(1.0) for a in mu.atoms)
    assert all(a.cone.arc().length == pytest.approx(math.pi / 2) for a in mu.atoms)
    assert all(a.subspace.dim == 2 for a in mu.atoms)
    assert integrate(mu).value == pytest.approx(6 * math.pi, abs=1e-9)
    assert integrate(tau(cube(3), 2)).value == pytest.approx(6.0, abs=1e-12)
    assert len(mu.records()) == 12


def test_tau_empty_for_segment():
    seg = build([(0, 0, 0), (1, 0, 0)])
    mu = tau(seg, 2)
    assert mu.is_empty
    assert integrate(mu).value == 0.0
    with pytest.raises(DomainError):
        tau(seg, 3)


@pytest.mark.parametrize("sides", [(1, 1, 1), (2, "1/2", 3), ("3/4", "5/4", 1)])
def test_total_mass_boxes(sides):
    P = box(sides)
    V = box_intrinsic([float(Fraction(s)) for s in sides])
    for j in (0, 1, 2):
        est = integrate(tau(P, j), N=100_000, rng=j, exact_max=3)
        assert est.value == pytest.approx(sphere_area(3 - j) * V[j], abs=1e-9)


def test_total_mass_simplex():
    S = simplex(3)
    V = simplex_intrinsic()
    for j in (1, 2):
        est = integrate(tau(S, j))
        assert est.value == pytest.approx(sphere_area(3 - j) * V[j], abs=1e-9)
    est = integrate(tau(S, 0), N=100_000, rng=3, exact_max=2)
    assert est.agrees(4 * math.pi)


def test_symmetric_integrand_vanishes():
    est = integrate(tau(cube(3), 1), coordinate(2))
    assert abs(est.value) <= 3 * est.se + 1e-12


def test_cap_integral_exact():
    # four top edges each contribute an arc of length pi/3 inside the cap
    est = integrate(tau(cube(3), 1), cap_indicator([0, 0, 1], 0.5))
    assert est.value == pytest.approx(4 * math.pi / 3, abs=1e-9)


def test_translation_invariance_exact():
    P = simplex(3)
    Q = P.translated(("1/3", "-2", "7/5"))
    for j in (0, 1, 2):
        a, b = tau(P, j).atoms, tau(Q, j).atoms
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert x.weight == y.weight
            assert np.array_equal(x.cone.dual, y.cone.dual)
            assert np.array_equal(x.subspace.basis, y.subspace.basis)


def test_rigid_covariance():
    P = simplex(3)
    R = random_rotation(3, 5)
    f = mixed_plane_function()
    lhs = integrate(tau(P.transformed(R), 1), f)
    rhs = integrate(tau(P, 1), f.rotated(R.inverse))
    assert lhs.value == pytest.approx(rhs.value, rel=1e-9, abs=1e-9)


def test_flag_function_bounded_on_probe():
    lo, hi = mixed_plane_function().probe_bounds(3, 2, n=10_000, rng=0)
    assert -1.0 <= lo and hi <= 3.0


# -- transform T ------------------------------------------------------------

@pytest.mark.parametrize("d,j", [(3, 1), (4, 1), (4, 2), (5, 2)])
def test_transform_constant(d, j):
    est = transform_constant_check(d, j, N=100_000, rng=d * 10 + j)
    assert est.agrees(1 / binom(d - 1, j))


def test_transform_of_constant_function():
    T = transform_T(1, constant(2.0), N=4000, rng=1)
    gen = np.random.default_rng(0)
    u = sphere_points(20, E3, gen)
    B = haar_bases_containing(u, 2, gen)
    vals, errs = T.evaluate_with_error(u, B)
    z = (vals - 1.0) / errs
    assert np.max(np.abs(z)) < 4
    # memoised: same flags give the same values
    assert np.array_equal(T.evaluate(u, B), vals)
    assert len(T.cache) == 20


def test_transform_concentrates():
    L0 = E3[:, :2]
    L1 = E3[:, [0, 2]]
    T = transform_T(1, det_squared_to(Subspace(L0)), N=20_000, rng=2)
    u = np.array([[1.0, 0, 0], [1.0, 0, 0]])
    vals, errs = T.evaluate_with_error(u, np.stack([L0, L1]))
    assert vals[0] - vals[1] > 5 * math.hypot(*errs)


def test_transform_rotation_equivariance():
    R = random_rotation(3, 9)
    h = mixed_plane_function()
    a = transform_T(1, h.rotated(R), N=2000, rng=3)
    b = transform_T(1, h, N=2000, rng=4).rotated(R)
    gen = np.random.default_rng(1)
    u = sphere_points(100, E3, gen)
    B = haar_bases_containing(u, 2, gen)
    va, ea = a.evaluate_with_error(u, B)
    vb, eb = b.evaluate_with_error(u, B)
    z = (va - vb) / np.hypot(ea, eb)
    # 100 flags: a family-wise bound
    assert np.max(np.abs(z)) < 4.5
    assert abs(z.mean()) < 3 / math.sqrt(len(z)) * 1.5


def test_transform_rejects_wrong_grassmannian():
    T = transform_T(1, constant(), N=10, rng=0)
    with pytest.raises(DomainError):
        T.evaluate(np.array([[1.0, 0, 0]]), np.array([[[1.0], [0], [0]]]))


# -- psi ----------------------------------------------------------------------

def test_psi_constant_cube():
    est = psi_integrate(cube(3), 1, constant(), N=10_000, rng=5)
    assert est.agrees(3 * math.pi)


def test_psi_matches_direct_nested_sampling():
    P = simplex(3)
    g = det_squared_to(Subspace(np.array([[1.0, 1, 0], [0, 1, 1]]).T))
    a = psi_integrate(P, 1, g, N=10_000, rng=6)
    b = psi_direct(P, 1, g, N=200_000, rng=7)
    assert abs(combined_z(a, b)) < 3


# -- flag area and curvature measures ---------------------------------------

def test_theta_cube_k0_totals():
    C = cube(3)
    expect = [4 * math.pi, 3 * math.pi, 6.0]
    for m in range(3):
        est = integrate(theta_polytope(C, 0, m), N=40_000, rng=m)
        assert est.agrees(expect[m])


def test_curvature_measure_edge_ball():
    C = cube(3)
    mid = np.array([0.5, 0.0, 0.0])
    ball = spatial(lambda x: (np.linalg.norm(x - mid, axis=1) <= 0.1).astype(float), "ball", True)
    est = integrate(flag_curvature_measure(C, 0, 1), ball, N=100_000, rng=8)
    assert est.agrees(0.05 * math.pi)


def test_theta_domain():
    with pytest.raises(DomainError):
        theta_polytope(cube(3), 1, 2)
    with pytest.raises(DomainError):
        theta_polytope(cube(3), 3, 0)


@pytest.mark.parametrize("k,m", [(0, 1), (1, 0), (1, 1), (2, 0)])
def test_alternative_representation(k, m, random_polys):
    P = random_polys[k + m]
    d = 3
    F = Subspace(E3[:, :max(1, k)]) if k else None

    def fn(u, B):
        base = 1.0 + 0.5 * u[:, 2]
        if k:
            from flagmeasures.euclid import subspace_det_batch

            base = base * (0.5 + subspace_det_batch(B, np.broadcast_to(F.basis, B.shape)) ** 2)
        return base

    f = FlagFunction(fn, "pos")
    lhs, rhs = alt_representation(P, k, m, f, N=40_000, rng=11)
    assert abs(combined_z(lhs, rhs)) < 3.5
    assert lhs.value > 0 and d == 3


@pytest.mark.parametrize("body", ["cube", "simplex"])
def test_area_marginal(body):
    P = cube(3) if body == "cube" else simplex(3)
    gen = np.random.default_rng(12)
    for c in sphere_points(3, E3, gen):
        lhs, rhs = area_marginal(P, 1, 1, cap_indicator(c, 0.3), N=40_000, rng=13)
        assert abs(combined_z(lhs, rhs)) < 3.5


@pytest.mark.parametrize("body", ["cube", "simplex"])
def test_psi_link(body):
    P = cube(3) if body == "cube" else simplex(3)
    lhs, rhs = psi_link(P, 1, constant(), N=20_000, rng=14, N_psi=10_000)
    assert abs(combined_z(lhs, rhs)) < 3.5
    if body == "cube":
        assert rhs.value == pytest.approx(1.5 * math.pi, rel=0.05)


# -- valuations ---------------------------------------------------------------

def test_valuation_examples():
    C = cube(3)
    a = evaluate_valuation(C, Valuation(1, "flag_continuous", constant()))
    assert a.value == pytest.approx(6 * math.pi, abs=1e-9)
    b = evaluate_valuation(C, Valuation(1, "strongly_flag_continuous", constant()), N=10_000, rng=15)
    assert b.agrees(3 * math.pi)
    with pytest.raises(DomainError):
        evaluate_valuation(C, Valuation(2, "flag_continuous", constant()))
    with pytest.raises(DomainError):
        Valuation(1, "nonsense", constant())


def test_strongly_continuous_routes_agree(random_polys):
    phi = Valuation(1, "strongly_continuous", lambda u: 1.0 + u[:, 0] ** 2 + 0.3 * u[:, 1])
    for i, P in enumerate(random_polys):
        a = evaluate_valuation(P, phi, route="tau")
        b = evaluate_valuation(P, phi, N=40_000, rng=20 + i, route="theta")
        assert abs(combined_z(a, b)) < 3.5


def test_valuation_property_split_box():
    f = mixed_plane_function()
    phi = Valuation(1, "flag_continuous", f)
    P = box([1, 1, 1])
    Q = box([2, 1, 1]).translated(("1/2", 0, 0))
    U = box(["5/2", 1, 1])
    I = box(["1/2", 1, 1]).translated(("1/2", 0, 0))
    ev = [evaluate_valuation(X, phi).value for X in (U, I, P, Q)]
    assert ev[0] + ev[1] == pytest.approx(ev[2] + ev[3], abs=1e-9)


@pytest.mark.parametrize("s", ["1/2", 2])
def test_homogeneity(s):
    phi = Valuation(1, "flag_continuous", mixed_plane_function())
    P = simplex(3)
    a = evaluate_valuation(P.scaled(s), phi).value
    b = evaluate_valuation(P, phi).value
    assert a == pytest.approx(float(Fraction(s)) * b, rel=1e-9)


def test_valuation_rotation():
    R = random_rotation(3, 2)
    phi = Valuation(1, "flag_continuous", mixed_plane_function())
    P = simplex(3)
    a = evaluate_valuation(P.transformed(R), phi.rotated(R)).value
    b = evaluate_valuation(P, phi).value
    assert a == pytest.approx(b, rel=1e-9)
