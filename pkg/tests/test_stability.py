import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from balancedbound import bundle as bd
from balancedbound import quadrature as q
from balancedbound import stability as st


def _random_gl(N, rng):
    return rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))


@pytest.mark.parametrize("r,N", [(1, 2), (1, 3), (2, 4), (2, 5)])
def test_identity_has_no_diagonal_destabilizer(r, N):
    v = st.diagonal_destabilizer_search(st.gieseker_identity(r, N), bound=2, random_bases=3)
    assert v.verdict == "no_diagonal_destabilizer"
    assert v.conclusive and not v.unstable


def test_rank_one_tensor_is_unstable():
    T = st.supported_tensor(2, 4, [(0, 1)])
    v = st.diagonal_destabilizer_search(T, bound=2, random_bases=0)
    assert v.verdict == "destabilized" and v.unstable
    assert sum(v.m[:2]) > 0
    assert st.one_ps_limit(T, v.m).limit_is_zero


def test_partial_support_has_non_closed_orbit():
    # columns {01, 23}: weights (1, 1, -1, -1) kill neither, and the limit is T itself
    T = st.supported_tensor(2, 4, [(0, 1), (2, 3)])
    lim = st.one_ps_limit(T, (1, -1, 1, -1))
    assert lim.limit_exists and not lim.limit_is_zero


def test_act_composition(rng):
    T = st.GiesekerTensor(_random_gl(6, rng), 4, 2)
    a, b = _random_gl(4, rng), _random_gl(4, rng)
    lhs = st.act(a, st.act(b, T)).components
    rhs = st.act(b @ a, T).components
    assert np.allclose(lhs, rhs)


def test_unitary_action_preserves_norm(rng):
    T = st.gieseker_identity(2, 5)
    U, _ = np.linalg.qr(_random_gl(5, rng))
    assert np.isclose(np.linalg.norm(st.act(U, T).components), np.linalg.norm(T.components))


def test_act_rejects_singular():
    with pytest.raises(ValueError, match="singular"):
        st.act(np.zeros((3, 3)), st.gieseker_identity(1, 3))


def test_only_roots_of_unity_fix_identity(rng):
    T = st.gieseker_identity(2, 4)
    for _ in range(20):
        a = bd.normalize_det(_random_gl(4, rng))
        assert not np.allclose(st.act(a, T).components, T.components)
    zeta = np.exp(2j * np.pi / 2) * np.eye(4)
    assert np.allclose(st.act(zeta, T).components, T.components)


@settings(max_examples=50, deadline=None)
@given(m=hst.lists(hst.integers(-5, 5), min_size=4, max_size=4))
def test_index_weights_sum_to_zero(m):
    m = np.array(m)
    m[-1] -= m.sum()
    w = st.index_weights(m, 4, 2)
    # each index appears in C(3, 1) = 3 of the six pairs
    assert w.sum() == 3 * m.sum() == 0


@pytest.mark.parametrize("m,match", [((1, 2, -3), "sorted"), ((1, 1, 1), "sum"),
                                     ((0, 0, 0), "vanish")])
def test_lemma_check_input_errors(m, match):
    with pytest.raises(ValueError, match=match):
        st.sorted_weight_lemma_check(np.array(m), 1)


def test_one_ps_weight_validation():
    T = st.gieseker_identity(1, 3)
    with pytest.raises(ValueError, match="sum"):
        st.one_ps_limit(T, (1, 0, 0))
    with pytest.raises(ValueError, match="integers"):
        st.one_ps_limit(T, (0.5, -0.5, 0))
    with pytest.raises(ValueError, match="length"):
        st.one_ps_limit(T, (1, -1))


def test_lemma_holds_on_lattice():
    for N in range(2, 6):
        for m in st.sorted_weight_lattice(N, 4):
            for r in range(1, N):
                assert st.sorted_weight_lemma_check(m, r)


def test_weight_lattice_complete():
    lat = st.weight_lattice(3, 2)
    assert len(lat) == 18  # 19 zero-sum vectors in [-2, 2]^3 minus the origin
    assert [tuple(x) for x in lat] == sorted(tuple(x) for x in lat)


def test_lattice_cap():
    with pytest.raises(st.LatticeTooLarge):
        st.diagonal_destabilizer_search(st.gieseker_identity(2, 6), bound=10, cap=1000)


def test_zero_tensor_rejected():
    with pytest.raises(ValueError, match="zero"):
        st.GiesekerTensor(np.zeros((6, 6)), 4, 2)


def test_gieseker_point_of_universal_dual(g24_small):
    T, resid = st.gieseker_point_from_ensemble(bd.universal_dual(2, 4, g24_small))
    assert resid < 1e-12
    assert np.allclose(T.components, np.eye(6), atol=1e-10)


def test_gieseker_point_of_line_bundle():
    g = q.build_grid(q.MetricSpec.cpn_fs(2), 300, seed=0)
    T, resid = st.gieseker_point_from_ensemble(bd.o_k_cpn(2, 2, g))
    assert resid < 1e-12
    assert np.allclose(T.components, np.eye(6), atol=1e-10)


def test_basis_mismatch(g24_small):
    ens = bd.universal_dual(2, 4, g24_small)
    det = bd.determinant_basis(ens)
    from dataclasses import replace
    truncated = replace(det, A=det.A[:, :3])
    with pytest.raises(st.BasisMismatchError):
        st.gieseker_point_from_ensemble(ens, truncated)
