"""Gieseker points and one-parameter-subgroup tests.

A Gieseker tensor ``T in Hom(Lambda^r V, W)`` is stored by its components
``C[w, I] = <d_w, T(e_I)>`` with columns in the package's lexicographic
multi-index order.  ``SL(V)`` acts by ``(a . T)(v_1 ^ ... ^ v_r) =
T(a v_1 ^ ... ^ a v_r)``, i.e. ``C -> C Lambda^r(a)``.

Under the diagonal one-parameter subgroup ``lambda(t) = diag(t^{m_1}, ...)``
column ``I`` scales by ``t^{m_I}`` with ``m_I = sum_{i in I} m_i``.  The limit
``t -> 0`` exists iff every nonzero column has ``m_I >= 0``; it keeps the
columns with ``m_I = 0``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from . import grassmannian as gr
from .bundle import SectionEnsemble, determinant_basis

ZERO_TOL = 1e-10
LATTICE_CAP = 5_000_000


class LatticeTooLarge(ValueError):
    pass


class BasisMismatchError(ValueError):
    """The wedge values are not in the span of the supplied det-bundle basis."""


@dataclass(frozen=True, eq=False)
class GiesekerTensor:
    components: np.ndarray      # (dim_W, C(N, r))
    N: int
    r: int

    def __post_init__(self):
        C = np.asarray(self.components, dtype=complex)
        K = len(gr.multi_indices(self.N, self.r))
        if C.ndim != 2 or C.shape[1] != K:
            raise ValueError(f"components must have shape (dim_W, {K})")
        if not np.any(np.abs(C) > 0):
            raise ValueError("Gieseker tensor is identically zero")
        object.__setattr__(self, "components", C)

    @property
    def dim_W(self) -> int:
        return self.components.shape[0]

    @property
    def indices(self):
        return gr.multi_indices(self.N, self.r)

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.components, axis=0)

    def support(self, tol: float = ZERO_TOL) -> np.ndarray:
        """Boolean mask of the nonzero columns (relative to the largest)."""
        c = self.column_norms()
        return c > tol * c.max()

    def to_dict(self):
        C = self.components
        return {"N": self.N, "r": self.r, "real": C.real.tolist(), "imag": C.imag.tolist()}


def gieseker_identity(r: int, N: int) -> GiesekerTensor:
    """The identity of ``Lambda^r C^N``: the Gieseker point of ``U^*`` in the Plucker basis."""
    if not 1 <= r < N:
        raise ValueError(f"need 1 <= r < N, got r={r}, N={N}")
    K = len(gr.multi_indices(N, r))
    return GiesekerTensor(np.eye(K, dtype=complex), N, r)


def supported_tensor(r: int, N: int, columns) -> GiesekerTensor:
    """Tensor whose only nonzero columns are the given multi-indices (value 1 on the diagonal)."""
    idx = gr.multi_indices(N, r)
    K = len(idx)
    C = np.zeros((K, K), dtype=complex)
    for I in columns:
        j = idx.index(tuple(I))
        C[j, j] = 1.0
    return GiesekerTensor(C, N, r)


def act(a, T: GiesekerTensor) -> GiesekerTensor:
    """``a . T``; satisfies ``act(a, act(b, T)) == act(b @ a, T)``.

    Scalars with ``zeta^r = 1`` act trivially, so "only ``a = I`` fixes the
    identity" holds up to those.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (T.N, T.N):
        raise ValueError(f"group element must be {T.N} x {T.N}")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= gr.RANK_TOL * s[0]:
        raise ValueError("group element is singular")
    return GiesekerTensor(T.components @ gr.exterior_power(a, T.r), T.N, T.r)


def index_weights(m, N: int, r: int) -> np.ndarray:
    """``m_I = sum_{i in I} m_i`` for every multi-index; ``m`` may be a stack ``(..., N)``."""
    m = np.asarray(m)
    dtype = m.dtype if m.dtype.kind == "i" else float
    inc = np.zeros((N, len(gr.multi_indices(N, r))), dtype=dtype)
    for j, I in enumerate(gr.multi_indices(N, r)):
        inc[list(I), j] = 1
    return m @ inc


def _check_weights(m, N):
    m = np.asarray(m)
    if m.shape != (N,):
        raise ValueError(f"weight vector must have length {N}")
    if np.any(m != np.round(m)):
        raise ValueError("weights must be integers")
    if int(np.sum(m)) != 0:
        raise ValueError("weights must sum to zero")
    return m.astype(int)


@dataclass
class OnePSLimit:
    limit_exists: bool
    limit: GiesekerTensor | None
    limit_is_zero: bool
    weights: dict

    def to_dict(self):
        return {"limit_exists": self.limit_exists, "limit_is_zero": self.limit_is_zero,
                "weights": {"".join(map(str, k)): int(v) for k, v in self.weights.items()}}


def one_ps_limit(T: GiesekerTensor, m) -> OnePSLimit:
    """Limit of ``lambda(t) . T`` as ``t -> 0`` for ``lambda(t) = diag(t^m)``."""
    m = _check_weights(m, T.N)
    w = index_weights(m, T.N, T.r)
    weights = dict(zip(T.indices, w.tolist()))
    nz = T.support()
    if np.any(w[nz] < 0):
        return OnePSLimit(False, None, False, weights)
    keep = nz & (w == 0)
    if not np.any(keep):
        return OnePSLimit(True, None, True, weights)
    C = np.where(keep[None, :], T.components, 0)
    return OnePSLimit(True, GiesekerTensor(C, T.N, T.r), False, weights)


def weight_lattice(N: int, bound: int) -> np.ndarray:
    """All nonzero integer vectors with ``|m_i| <= bound`` and zero sum, in lexicographic order."""
    rng = range(-bound, bound + 1)
    out = [m for m in itertools.product(rng, repeat=N) if sum(m) == 0 and any(m)]
    return np.array(out, dtype=int).reshape(-1, N)


def sorted_weight_lattice(N: int, bound: int) -> np.ndarray:
    """Descending-sorted nonzero zero-sum vectors with ``|m_i| <= bound``."""
    vals = range(bound, -bound - 1, -1)
    out = [m for m in itertools.combinations_with_replacement(vals, N) if sum(m) == 0 and any(m)]
    return np.array(out, dtype=int).reshape(-1, N)


def _first_hit(T: GiesekerTensor, lattice: np.ndarray):
    """Index of the first lattice vector whose limit exists, or None.

    Vectors sending ``T`` to zero (all support weights positive) are preferred,
    since they witness instability rather than only a non-closed orbit.
    """
    nz = T.support()
    W = index_weights(lattice, T.N, T.r)[:, nz]
    for ok in (np.all(W > 0, axis=1), np.all(W >= 0, axis=1)):
        hits = np.flatnonzero(ok)
        if hits.size:
            return int(hits[0])
    return None


@dataclass
class StabilityVerdict:
    verdict: str                      # no_diagonal_destabilizer | destabilized
    m: tuple | None = None
    basis: np.ndarray | None = None   # unitary whose columns diagonalize the 1-PS
    basis_index: int | None = None    # 0 = standard basis
    limit_is_zero: bool | None = None
    conclusive: bool = False
    lattice_size: int = 0
    bases_searched: int = 0

    @property
    def unstable(self) -> bool:
        """True when a searched 1-PS drives the tensor to zero."""
        return bool(self.limit_is_zero)

    def to_dict(self):
        d = {"verdict": self.verdict, "lattice_size": self.lattice_size,
             "bases_searched": self.bases_searched, "conclusive": self.conclusive}
        if self.verdict == "destabilized":
            d.update({"m": [int(x) for x in self.m], "basis_index": self.basis_index,
                      "limit_is_zero": self.limit_is_zero, "unstable": self.unstable,
                      "basis": {"real": self.basis.real.tolist(),
                                "imag": self.basis.imag.tolist()}})
        return d


def diagonal_destabilizer_search(T: GiesekerTensor, bound: int = 4, random_bases: int = 10,
                                 seed: int = 0, cap: int = LATTICE_CAP) -> StabilityVerdict:
    """Look for a diagonal 1-PS whose limit exists, in the standard and random unitary bases.

    The 1-PS ``U diag(t^m) U^*`` acts on ``T`` as ``diag(t^m)`` acts on
    ``act(U, T)`` up to a fixed invertible factor, so each basis reduces to the
    diagonal test.  The first hit in (basis, lexicographic ``m``) order wins.
    A ``no_diagonal_destabilizer`` answer is evidence only; it is conclusive
    for the diagonal subgroups of the standard basis when every column of
    ``T`` is nonzero, since then the weights sum to zero over the support.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    N = T.N
    size = (2 * bound + 1) ** N
    if size * (random_bases + 1) > cap:
        raise LatticeTooLarge(f"weight lattice of {size} vectors x {random_bases + 1} bases "
                              f"exceeds cap {cap}")
    lattice = weight_lattice(N, bound)
    rng = np.random.default_rng(seed)
    bases = [np.eye(N, dtype=complex)]
    bases += [unitary_group.rvs(N, random_state=rng) for _ in range(random_bases)]
    for k, U in enumerate(bases):
        Tk = T if k == 0 else act(U, T)
        hit = _first_hit(Tk, lattice)
        if hit is not None:
            m = tuple(lattice[hit].tolist())
            lim = one_ps_limit(Tk, m)
            return StabilityVerdict("destabilized", m, U, k, lim.limit_is_zero, True,
                                    len(lattice), k + 1)
    conclusive = bool(np.all(T.support()))
    return StabilityVerdict("no_diagonal_destabilizer", conclusive=conclusive,
                            lattice_size=len(lattice), bases_searched=len(bases))


def sorted_weight_lemma_check(m, r: int) -> bool:
    """``m_1 + ... + m_r > 0`` for sorted, nonzero, zero-sum integer weights."""
    m = np.asarray(m)
    if m.ndim != 1 or not 1 <= r < m.size:
        raise ValueError("need a weight vector and 1 <= r < N")
    if np.any(np.diff(m) > 0):
        raise ValueError("weights must be sorted in descending order")
    if not np.any(m):
        raise ValueError("weights must not all vanish")
    if np.sum(m) != 0:
        raise ValueError("weights must sum to zero")
    return bool(np.sum(m[:r]) > 0)


def gieseker_point_from_ensemble(ens: SectionEnsemble, det_basis: SectionEnsemble | None = None,
                                 fit_tol: float = 1e-8) -> tuple[GiesekerTensor, float]:
    """Fit ``T_E`` from pointwise wedges ``det A_I(x)`` against a basis of ``H^0(det E)``.

    Both sides are holomorphic sections in the frame ``det sigma``, so the fit
    is exact up to rounding; each point's row is scaled by the det-basis norm
    to remove the frame dependence.  Returns the tensor and the relative
    residual.
    """
    if det_basis is None:
        det_basis = determinant_basis(ens)
    if det_basis.r != 1 or det_basis.grid is not ens.grid:
        raise ValueError("det basis must be a rank-one ensemble on the same grid")
    D = det_basis.A[..., 0]
    Wv = gr.plucker_embed(ens.A, check=False)
    scale = np.linalg.norm(D, axis=1, keepdims=True)
    D, Wv = D / scale, Wv / scale
    C, *_ = np.linalg.lstsq(D, Wv, rcond=None)
    resid = float(np.linalg.norm(D @ C - Wv) / np.linalg.norm(Wv))
    if resid > fit_tol:
        raise BasisMismatchError(f"wedge values are not spanned by the det basis "
                                 f"(relative residual {resid:.3e} > {fit_tol:.1e})")
    return GiesekerTensor(C, ens.N, ens.r), resid
