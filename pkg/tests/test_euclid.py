import math

import numpy as np
import pytest
from scipy.special import gamma

from flagmeasures.euclid import (
    DomainError,
    RngStream,
    Rotation,
    Subspace,
    ball_volume,
    binom,
    complement_basis,
    haar_bases,
    haar_bases_containing,
    haar_bases_inside,
    orthonormalize,
    principal_cosines,
    random_rotation,
    rotation_about_axis,
    sphere_area,
    sphere_points,
    subspace_det,
    subspace_det_batch,
)


@pytest.mark.parametrize("n", range(0, 7))
def test_sphere_area_and_ball_volume(n):
    if n == 0:
        assert sphere_area(1) == pytest.approx(2.0)
        assert ball_volume(0) == 1.0
        return
    assert sphere_area(n) == pytest.approx(2 * math.pi ** (n / 2) / gamma(n / 2))
    # omega_n = n kappa_n
    assert sphere_area(n) == pytest.approx(n * ball_volume(n))


def test_known_constants():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_orthonormalize_drops_dependent_columns():
    V = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    Q = orthonormalize(V)
    assert Q.shape == (3, 2)
    assert np.allclose(Q.T @ Q, np.eye(2))


def test_complement_basis():
    B = orthonormalize(np.array([[1.0, 1.0, 0.0]]).T)
    C = complement_basis(B)
    assert C.shape == (3, 2)
    assert np.allclose(B.T @ C, 0)
    assert np.allclose(C.T @ C, np.eye(2))


def test_subspace_basics():
    L = Subspace.span(np.array([[1.0, 0, 0], [1.0, 1.0, 0]]).T)
    assert L.dim == 2 and L.ambient == 3
    assert L.contains([3.0, -1.0, 0.0])
    assert not L.contains([0.0, 0.0, 1.0])
    assert L.complement().same_as(Subspace.span(np.array([0.0, 0, 1])))
    assert Subspace.zero(4).dim == 0
    with pytest.raises(DomainError):
        Subspace(np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_subspace_det_matches_principal_cosines():
    gen = np.random.default_rng(1)
    for _ in range(20):
        d = 5
        a, b = gen.integers(1, d, size=2)
        L = Subspace(haar_bases(1, d, a, gen)[0])
        M = Subspace(haar_bases(1, d, b, gen)[0])
        small, big = (L, M) if L.dim <= M.dim else (M, L)
        assert subspace_det(L, M) == pytest.approx(np.prod(principal_cosines(small, big)), abs=1e-12)
        assert subspace_det(L, M) == pytest.approx(subspace_det(M, L), abs=1e-12)


def test_subspace_det_extremes():
    e = np.eye(3)
    assert subspace_det(Subspace(e[:, :2]), Subspace(e[:, :2])) == pytest.approx(1.0)
    assert subspace_det(Subspace(e[:, :1]), Subspace(e[:, 1:])) == pytest.approx(0.0)
    assert subspace_det(Subspace.zero(3), Subspace(e[:, :2])) == 1.0


def test_haar_projector_mean():
    # E[P_L] = (k/d) I for Haar L
    gen = np.random.default_rng(2)
    B = haar_bases(40_000, 4, 2, gen)
    P = np.einsum("ndk,nek->de", B, B) / len(B)
    assert np.allclose(P, 0.5 * np.eye(4), atol=0.01)


def test_haar_containing_and_inside():
    gen = np.random.default_rng(3)
    u = sphere_points(500, np.eye(4), gen)
    B = haar_bases_containing(u, 3, gen)
    assert np.allclose(B[:, :, 0], u)
    assert np.allclose(np.einsum("ndi,ndj->nij", B, B), np.eye(3))
    U = Subspace(np.eye(5)[:, :3])
    Bi = haar_bases_inside(np.broadcast_to(U.basis, (100, 5, 3)), 2, gen)
    assert np.allclose(Bi[:, 3:, :], 0)


def test_sphere_points_uniform_on_span():
    gen = np.random.default_rng(4)
    basis = np.eye(3)[:, :2]
    x = sphere_points(20_000, basis, gen)
    assert np.allclose(np.linalg.norm(x, axis=1), 1)
    assert np.allclose(x[:, 2], 0)
    assert abs(np.mean(x[:, 0] ** 2) - 0.5) < 0.02


def test_rotation_about_axis():
    R = rotation_about_axis([0, 0, 1], math.pi / 4)
    assert np.allclose(R.apply([0, 0, 1]), [0, 0, 1])
    assert np.allclose(R.apply([1, 0, 0]), [math.cos(math.pi / 4), math.sin(math.pi / 4), 0])
    assert np.allclose(R.compose(R.inverse).matrix, np.eye(3))
    with pytest.raises(DomainError):
        rotation_about_axis([0, 0, 0], 1.0)


def test_rotation_validation():
    with pytest.raises(DomainError):
        Rotation(np.diag([1.0, 1.0, -1.0]))
    Rm = random_rotation(4, 5)
    assert abs(np.linalg.det(Rm.matrix) - 1) < 1e-12


def test_rng_streams_reproducible_and_distinct():
    a = RngStream(7).child(3).generator.random(5)
    b = RngStream(7).child(3).generator.random(5)
    c = RngStream(7).child(4).generator.random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_subspace_det_batch_broadcast():
    gen = np.random.default_rng(6)
    A = haar_bases(10, 4, 2, gen)
    B = haar_bases(10, 4, 3, gen)
    vals = subspace_det_batch(A, B)
    ref = [subspace_det(Subspace(A[i]), Subspace(B[i])) for i in range(10)]
    assert np.allclose(vals, ref)


def test_binom():
    assert binom(5, 2) == 10
    assert binom(3, 5) == 0
