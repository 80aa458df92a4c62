"""Linear-algebra kernel for the Grassmannian G(r, N).

A point of G(r, N) is represented by a Stiefel matrix, an ``N x r`` complex
matrix of maximal rank, defined up to right multiplication by GL(r).  All
functions accept a single matrix of shape ``(N, r)`` or a stack of shape
``(..., N, r)``.

Conventions used everywhere in the package:

* multi-indices are sorted 0-based tuples, enumerated lexicographically by
  :func:`multi_indices`;
* Hermitian (1,1)-form coefficients ``h`` mean ``omega = i sum h_ab dw_a ^ dw_b-bar``
  in a complex chart ``w``;
* the Killing product on matrices is ``<X, Y> = tr(X^* Y)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

RANK_TOL = 1e-10


class DegenerateStiefelError(ValueError):
    """Raised when a Stiefel matrix is (numerically) rank deficient."""


@lru_cache(maxsize=None)
def multi_indices(N: int, r: int) -> tuple[tuple[int, ...], ...]:
    """Sorted size-``r`` subsets of ``range(N)`` in lexicographic order."""
    return tuple(combinations(range(N), r))


def check_rank(A, rank_tol: float = RANK_TOL) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim < 2:
        raise ValueError("Stiefel data must have shape (..., N, r)")
    N, r = A.shape[-2:]
    if not 1 <= r < N:
        raise ValueError(f"need 1 <= r < N, got r={r}, N={N}")
    s = np.linalg.svd(A, compute_uv=False)
    bad = s[..., -1] <= rank_tol * s[..., 0]
    if np.any(bad):
        where = np.argwhere(np.atleast_1d(bad))[0] if A.ndim > 2 else ()
        raise DegenerateStiefelError(
            f"rank-deficient Stiefel matrix at {tuple(int(i) for i in where)}")
    return A


def projector(A) -> np.ndarray:
    """Orthogonal projector ``A (A^* A)^{-1} A^*`` onto the column span."""
    A = np.asarray(A, dtype=complex)
    Q, _ = np.linalg.qr(A)
    return Q @ np.conj(np.swapaxes(Q, -1, -2))


def moment_map(A, check: bool = True) -> np.ndarray:
    """SU(N) moment map ``i (A (A^*A)^{-1} A^* - (r/N) I)``."""
    if check:
        A = check_rank(A)
    N, r = A.shape[-2:]
    return 1j * (projector(A) - (r / N) * np.eye(N))


def killing_norm_sq(X) -> np.ndarray:
    X = np.asarray(X)
    return np.real(np.einsum('...ij,...ij->...', np.conj(X), X))


def plucker_embed(A, check: bool = True) -> np.ndarray:
    """Plucker coordinates: all ``r x r`` minors ``det A_I`` in lexicographic order."""
    if check:
        A = check_rank(A)
    A = np.asarray(A, dtype=complex)
    N, r = A.shape[-2:]
    idx = np.array(multi_indices(N, r))
    # A[..., idx, :] has shape (..., K, r, r)
    return np.linalg.det(A[..., idx, :])


def canonical_plucker(p) -> np.ndarray:
    """Scale a Plucker vector so its largest-modulus entry is real positive."""
    p = np.asarray(p, dtype=complex)
    k = np.argmax(np.abs(p), axis=-1)
    lead = np.take_along_axis(p, k[..., None], axis=-1)
    return p / (lead / np.abs(lead))


def wedge_norm_sq(A) -> np.ndarray:
    """``|a_1 ^ ... ^ a_r|^2 = det(A^* A)``."""
    A = np.asarray(A, dtype=complex)
    G = np.conj(np.swapaxes(A, -1, -2)) @ A
    return np.real(np.linalg.det(G))


def exterior_power(P, r: int) -> np.ndarray:
    """Matrix of ``Lambda^r P``: entry ``[I, J] = det P[I, J]``."""
    P = np.asarray(P, dtype=complex)
    N = P.shape[-1]
    idx = np.array(multi_indices(N, r))
    sub = P[..., idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def group_action(P, A) -> np.ndarray:
    """Standard GL(N) action on Stiefel coordinates, ``A -> P A``."""
    P = np.asarray(P, dtype=complex)
    s = np.linalg.svd(P, compute_uv=False)
    if np.any(s[..., -1] <= RANK_TOL * s[..., 0]):
        raise ValueError("group element is singular")
    return P @ np.asarray(A, dtype=complex)


def canonical_stiefel(A) -> np.ndarray:
    """Orthonormal representative that depends only on the column span.

    The span is first put in its best affine chart, which fixes the frame;
    thin QR with real positive ``diag(R)`` then orthonormalizes.
    """
    Z = to_affine(A)
    Q, R = np.linalg.qr(Z.stiefel())
    d = np.diagonal(R, axis1=-2, axis2=-1)
    return Q * (d / np.abs(d))[..., None, :]


# ---------------------------------------------------------------------------
# affine charts

@dataclass(frozen=True)
class AffineCoordinates:
    """Point in the chart ``U_I``: rows ``I`` of the Stiefel matrix are ``I_r``."""
    chart: tuple[int, ...]
    Z: np.ndarray

    @property
    def N(self) -> int:
        return self.Z.shape[-2] + self.Z.shape[-1]

    @property
    def r(self) -> int:
        return self.Z.shape[-1]

    def stiefel(self) -> np.ndarray:
        return reconstruct(self.chart, self.Z)


def complement(chart, N: int) -> tuple[int, ...]:
    s = set(chart)
    return tuple(i for i in range(N) if i not in s)


def reconstruct(chart, Z) -> np.ndarray:
    """Stiefel matrix whose ``chart`` rows are the identity and the rest ``Z``."""
    Z = np.asarray(Z, dtype=complex)
    m, r = Z.shape[-2:]
    N = m + r
    A = np.empty(Z.shape[:-2] + (N, r), dtype=complex)
    A[..., list(chart), :] = np.eye(r)
    A[..., list(complement(chart, N)), :] = Z
    return A


def to_affine(A, chart=None) -> AffineCoordinates:
    """Affine coordinates ``Z = A_2 A_1^{-1}``, so ``A ~ (I; Z)``.

    The default chart maximizes ``|det A_I|``.
    """
    A = check_rank(A)
    N, r = A.shape
    if chart is None:
        p = plucker_embed(A, check=False)
        chart = multi_indices(N, r)[int(np.argmax(np.abs(p)))]
    chart = tuple(chart)
    A1 = A[list(chart), :]
    A2 = A[list(complement(chart, N)), :]
    return AffineCoordinates(chart, np.linalg.solve(A1.T, A2.T).T)


def chart_derivatives(N: int, r: int, chart) -> np.ndarray:
    """Holomorphic derivatives of ``reconstruct(chart, Z)`` along each ``z_{p alpha}``.

    Returns shape ``(m*r, N, r)`` with coordinates flattened row-major over ``(p, alpha)``.
    """
    rest = complement(chart, N)
    m = N - r
    dA = np.zeros((m * r, N, r), dtype=complex)
    for p in range(m):
        for a in range(r):
            dA[p * r + a, rest[p], a] = 1.0
    return dA


def fs_potential(Z) -> np.ndarray:
    """Kahler potential ``log det(I_r + Z^* Z)`` of ``omega_G`` in an affine chart."""
    if isinstance(Z, AffineCoordinates):
        Z = Z.Z
    Z = np.asarray(Z, dtype=complex)
    r = Z.shape[-1]
    G = np.eye(r) + np.conj(np.swapaxes(Z, -1, -2)) @ Z
    return np.real(np.log(np.linalg.det(G)))


def logdet_hessian(A, dA) -> np.ndarray:
    """Complex Hessian ``d_a dbar_b log det(A^* A)`` for holomorphic ``A(w)``.

    ``A`` has shape ``(..., N, r)``, ``dA`` shape ``(..., n, N, r)`` holding
    ``dA/dw_a``.  The result ``(..., n, n)`` equals
    ``tr((A^*A)^{-1} dA_b^* (I - P) dA_a)``; for a Kodaira map it is the
    coefficient matrix of the pulled-back form ``phi^* omega_G``.
    """
    A = np.asarray(A, dtype=complex)
    dA = np.asarray(dA, dtype=complex)
    Q, R = np.linalg.qr(A)
    # (I - P) dA_a  with P = Q Q^*
    QdA = np.einsum('...ji,...ajk->...aik', np.conj(Q), dA)
    perp = dA - np.einsum('...ij,...ajk->...aik', Q, QdA)
    # dA_a R^{-1}: whiten with respect to A^*A = R^* R
    Rinv = np.linalg.inv(R)
    X = np.einsum('...aij,...jk->...aik', perp, Rinv)
    return np.einsum('...bij,...aij->...ab', np.conj(X), X)


def projector_derivative(A, dA) -> np.ndarray:
    """Holomorphic derivatives ``d_a P = (I - P) dA_a (A^*A)^{-1} A^*``."""
    A = np.asarray(A, dtype=complex)
    dA = np.asarray(dA, dtype=complex)
    Q, R = np.linalg.qr(A)
    QdA = np.einsum('...ji,...ajk->...aik', np.conj(Q), dA)
    perp = dA - np.einsum('...ij,...ajk->...aik', Q, QdA)
    Rinv = np.linalg.inv(R)
    # (A^*A)^{-1} A^* = R^{-1} Q^*
    return np.einsum('...aij,...jk,...lk->...ail', perp, Rinv, np.conj(Q))


def projector_mixed_derivative(A, dA) -> np.ndarray:
    """``d_a dbar_b P`` for holomorphic ``A`` with vanishing second derivatives.

    ``(I-P) dA_a G^{-1} dA_b^* (I-P) - A G^{-1} dA_b^* (I-P) dA_a G^{-1} A^*``,
    returned with shape ``(..., n, n, N, N)`` indexed ``[a, b]``.
    """
    A = np.asarray(A, dtype=complex)
    dA = np.asarray(dA, dtype=complex)
    Q, R = np.linalg.qr(A)
    QdA = np.einsum('...ji,...ajk->...aik', np.conj(Q), dA)
    perp = dA - np.einsum('...ij,...ajk->...aik', Q, QdA)
    Rinv = np.linalg.inv(R)
    X = np.einsum('...aij,...jk->...aik', perp, Rinv)          # (I-P) dA_a R^{-1}
    term1 = np.einsum('...aik,...bjk->...abij', X, np.conj(X))
    # A G^{-1} dA_b^* (I-P) dA_a G^{-1} A^* = Q [R^{-*} dA_b^*(I-P) dA_a R^{-1}] Q^*
    core = np.einsum('...bki,...akj->...abij', np.conj(X), X)
    term2 = np.einsum('...ik,...abkl,...jl->...abij', Q, core, np.conj(Q))
    return term1 - term2


# ---------------------------------------------------------------------------
# finite differences in affine coordinates

def _real_directions(n: int) -> np.ndarray:
    """Complex components of the real basis ``d/dx_1..d/dx_n, d/dy_1..d/dy_n``."""
    return np.concatenate([np.eye(n), 1j * np.eye(n)]).astype(complex)


def complex_hessian_fd(f, w0, h: float = 1e-3) -> np.ndarray:
    """Complex Hessian ``d_a dbar_b f`` of a real or complex function at ``w0``.

    ``f`` maps a flat complex coordinate vector to a scalar or array; second
    derivatives use centred differences with one Richardson step.
    """
    w0 = np.asarray(w0, dtype=complex).ravel()
    n = w0.size
    E = _real_directions(n)

    def second(step):
        f0 = np.asarray(f(w0))
        H = np.zeros((2 * n, 2 * n) + f0.shape, dtype=complex)
        for p in range(2 * n):
            for q in range(p, 2 * n):
                if p == q:
                    val = (f(w0 + step * E[p]) - 2 * f0 + f(w0 - step * E[p])) / step**2
                else:
                    val = (f(w0 + step * (E[p] + E[q])) - f(w0 + step * (E[p] - E[q]))
                           - f(w0 - step * (E[p] - E[q])) + f(w0 - step * (E[p] + E[q]))
                           ) / (4 * step**2)
                H[p, q] = H[q, p] = val
        return H

    Hr = (4 * second(h / 2) - second(h)) / 3
    xx, yy = Hr[:n, :n], Hr[n:, n:]
    xy, yx = Hr[:n, n:], Hr[n:, :n]
    return 0.25 * (xx + yy) + 0.25j * (xy - yx)


def holomorphic_gradient_fd(f, w0, h: float = 1e-3):
    """``(d_a f, dbar_a f)`` by 4th-order centred differences; arrays indexed ``[a, ...]``."""
    w0 = np.asarray(w0, dtype=complex).ravel()
    n = w0.size
    E = _real_directions(n)

    def d1(e):
        return (8 * (f(w0 + h * e) - f(w0 - h * e))
                - (f(w0 + 2 * h * e) - f(w0 - 2 * h * e))) / (12 * h)

    dx = np.array([d1(E[a]) for a in range(n)])
    dy = np.array([d1(E[n + a]) for a in range(n)])
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def hermitian_to_real_form(h) -> np.ndarray:
    """Real antisymmetric matrix ``Omega[p, q] = omega(e_p, e_q)`` of ``i h_ab dw_a ^ dw_b-bar``."""
    h = np.asarray(h, dtype=complex)
    E = _real_directions(h.shape[-1])
    M = E @ h @ np.conj(E).T
    return -2.0 * M.imag


def verify_omega_mu_identity(Z: AffineCoordinates, h: float = 1e-3) -> float:
    """Max discrepancy between ``omega_G`` and ``-i sum_jk d mu_jk ^ dbar mu_kj``.

    The left side is the finite-difference complex Hessian of the chart
    potential; the right side is assembled from finite-difference derivatives
    of the moment map.  Both are compared as real 2-forms.
    """
    chart, Z0 = Z.chart, np.asarray(Z.Z, dtype=complex)
    shape = Z0.shape

    def potential(w):
        return fs_potential(w.reshape(shape))

    def mu(w):
        return moment_map(reconstruct(chart, w.reshape(shape)), check=False)

    lhs = complex_hessian_fd(potential, Z0, h)
    dmu, dbar_mu = holomorphic_gradient_fd(mu, Z0, h)
    # -i sum_jk d_a mu_jk dbar_b mu_kj  ->  coefficient -tr(d_a mu dbar_b mu)
    rhs = -np.einsum('ajk,bkj->ab', dmu, dbar_mu)
    return float(np.max(np.abs(hermitian_to_real_form(lhs) - hermitian_to_real_form(rhs))))


def random_stiefel(N: int, r: int, size=None, rng=None) -> np.ndarray:
    """I.i.d. standard complex Gaussian ``N x r`` matrices (unitarily invariant)."""
    rng = np.random.default_rng(rng)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (N, r)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
