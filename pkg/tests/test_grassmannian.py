import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from balancedbound import grassmannian as gr

SHAPES = [(1, 2), (1, 3), (2, 4), (2, 5), (3, 5)]


def _gl(r, rng):
    return rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))


def _unitary(N, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N)))
    return Q


def test_multi_indices_lexicographic():
    assert gr.multi_indices(4, 2) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@pytest.mark.parametrize("r,N", SHAPES)
def test_moment_map_traceless_antihermitian(r, N, rng):
    mu = gr.moment_map(gr.random_stiefel(N, r, size=50, rng=rng))
    assert np.allclose(mu, -np.conj(np.swapaxes(mu, -1, -2)), atol=1e-12)
    assert np.allclose(np.trace(mu, axis1=-2, axis2=-1), 0, atol=1e-12)


@pytest.mark.parametrize("r,N", SHAPES)
def test_moment_map_right_gl_invariance(r, N, rng):
    A = gr.random_stiefel(N, r, rng=rng)
    assert np.allclose(gr.moment_map(A @ _gl(r, rng)), gr.moment_map(A), atol=1e-10)


@pytest.mark.parametrize("r,N", SHAPES)
def test_moment_map_unitary_equivariance(r, N, rng):
    A = gr.random_stiefel(N, r, rng=rng)
    U = _unitary(N, rng)
    lhs = gr.moment_map(U @ A)
    rhs = U @ gr.moment_map(A) @ U.conj().T
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_moment_map_cp1_example():
    mu = gr.moment_map(np.array([[1.0], [0.0]]))
    assert np.allclose(mu, 1j * np.diag([0.5, -0.5]))


def test_rank_deficient_rejected():
    A = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]])
    with pytest.raises(gr.DegenerateStiefelError):
        gr.moment_map(A)


@settings(max_examples=40, deadline=None)
@given(seed=hst.integers(0, 2**32 - 1), shape=hst.sampled_from(SHAPES))
def test_cauchy_binet(seed, shape):
    r, N = shape
    A = gr.random_stiefel(N, r, rng=seed)
    p = gr.plucker_embed(A)
    assert np.isclose(np.sum(np.abs(p) ** 2), gr.wedge_norm_sq(A), rtol=1e-12)


def test_plucker_g24_example():
    A = np.array([[1, 0], [0, 1], [0, 0], [0, 0]], dtype=complex)
    assert np.allclose(gr.plucker_embed(A), [1, 0, 0, 0, 0, 0])


def test_plucker_gl_scaling(rng):
    A = gr.random_stiefel(5, 2, rng=rng)
    g = _gl(2, rng)
    assert np.allclose(gr.plucker_embed(A @ g), np.linalg.det(g) * gr.plucker_embed(A))


def test_exterior_power_functorial(rng):
    a = _gl(4, rng)
    b = _gl(4, rng)
    ab = gr.exterior_power(a @ b, 2)
    assert np.allclose(ab, gr.exterior_power(a, 2) @ gr.exterior_power(b, 2))


def test_plucker_intertwines_action(rng):
    A = gr.random_stiefel(4, 2, rng=rng)
    P = _gl(4, rng)
    assert np.allclose(gr.plucker_embed(gr.group_action(P, A)),
                       gr.exterior_power(P, 2) @ gr.plucker_embed(A))


def test_group_action_rejects_singular(rng):
    with pytest.raises(ValueError):
        gr.group_action(np.zeros((3, 3)), gr.random_stiefel(3, 1, rng=rng))


@pytest.mark.parametrize("r,N", SHAPES)
def test_affine_roundtrip(r, N, rng):
    A = gr.random_stiefel(N, r, rng=rng)
    Z = gr.to_affine(A)
    assert np.allclose(gr.projector(Z.stiefel()), gr.projector(A), atol=1e-10)


def test_fs_potential_examples():
    assert gr.fs_potential(np.zeros((1, 1))) == 0
    assert np.isclose(gr.fs_potential(np.array([[1.0]])), np.log(2))


def test_canonical_stiefel_is_representative(rng):
    A = gr.random_stiefel(5, 2, rng=rng)
    C = gr.canonical_stiefel(A)
    assert np.allclose(C, gr.canonical_stiefel(A @ _gl(2, rng)), atol=1e-10)
    assert np.allclose(gr.projector(C), gr.projector(A))


@pytest.mark.parametrize("r,N", [(1, 2), (1, 3), (2, 4)])
def test_omega_mu_identity(r, N, rng):
    for A in gr.random_stiefel(N, r, size=20, rng=rng):
        assert gr.verify_omega_mu_identity(gr.to_affine(A)) < 1e-5


def test_logdet_hessian_matches_fd(rng):
    A = gr.random_stiefel(4, 2, rng=rng)
    Z = gr.to_affine(A)
    exact = gr.logdet_hessian(Z.stiefel(), gr.chart_derivatives(4, 2, Z.chart))
    fd = gr.complex_hessian_fd(lambda w: gr.fs_potential(w.reshape(2, 2)), Z.Z)
    assert np.allclose(exact, fd, atol=1e-7)


def test_projector_derivatives_match_fd(rng):
    A = gr.random_stiefel(3, 1, rng=rng)
    Z = gr.to_affine(A)
    dA = gr.chart_derivatives(3, 1, Z.chart)

    def P(w):
        return gr.projector(gr.reconstruct(Z.chart, w.reshape(Z.Z.shape)))

    d, dbar = gr.holomorphic_gradient_fd(P, Z.Z)
    dP = gr.projector_derivative(Z.stiefel(), dA)
    assert np.allclose(dP, d, atol=1e-9)
    assert np.allclose(np.conj(np.swapaxes(dP, -1, -2)), dbar, atol=1e-9)
    mixed = gr.projector_mixed_derivative(Z.stiefel(), dA)
    assert np.allclose(mixed, gr.complex_hessian_fd(P, Z.Z), atol=1e-6)
