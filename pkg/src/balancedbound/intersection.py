"""Exact intersection numbers on CP^n and G(r, N).

Both manifolds have Picard rank one, so every class used here is an integer
multiple of the hyperplane class ``H = c1(O(1))`` (the Plucker class on
G(r, N)).  Everything is computed with :class:`fractions.Fraction`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial


def grassmannian_degree(r: int, N: int) -> int:
    """Plucker degree ``H^{r(N-r)}`` of G(r, N)."""
    n = r * (N - r)
    num = factorial(n)
    den = 1
    for i in range(r):
        num *= factorial(i)
        den *= factorial(N - r + i)
    if num % den:
        raise ArithmeticError("non-integral degree")
    return num // den


@dataclass(frozen=True)
class ManifoldData:
    """G(r, N) (CP^n is ``r = 1``) with ``-K = anticanonical * H``."""
    r: int
    N: int

    @property
    def n(self) -> int:
        return self.r * (self.N - self.r)

    @property
    def top(self) -> int:
        return grassmannian_degree(self.r, self.N)

    @property
    def anticanonical(self) -> int:
        return self.N


@dataclass(frozen=True)
class BundleData:
    """Globally generated bundle with ``c1(E) = c1 * H``."""
    manifold: ManifoldData
    rank: int
    h0: int
    c1: int

    def degree(self, ell: int) -> int:
        """``c1(E) . c1(L)^{n-1}`` for ``L = O(ell)``."""
        n = self.manifold.n
        return self.c1 * ell ** (n - 1) * self.manifold.top


def line_bundle_cpn(n: int, k: int) -> BundleData:
    return BundleData(ManifoldData(1, n + 1), 1, comb(n + k, k), k)


def universal_dual_data(r: int, N: int) -> BundleData:
    return BundleData(ManifoldData(r, N), r, N, 1)


def mainest2_exact(E: BundleData, ell: int) -> Fraction:
    """``2 n h0 deg E / (r (h0 - r) c1(L)^n)`` for ``omega`` in ``2 pi c1(O(ell))``."""
    M = E.manifold
    n, h0, r = M.n, E.h0, E.rank
    return Fraction(2 * n * h0 * E.degree(ell), r * (h0 - r) * ell ** n * M.top)


def immersion_degree_exact(E: BundleData, ell: int) -> Fraction:
    """Holomorphic immersion degree ``d = deg E / (2 c1(L)^n)`` for a line bundle."""
    if E.rank != 1:
        raise ValueError("immersion degree is defined for line bundles")
    return Fraction(E.degree(ell), 2 * ell ** E.manifold.n * E.manifold.top)


def bly_bound_exact(E: BundleData, ell: int) -> Fraction:
    n, N = E.manifold.n, E.h0
    return Fraction(4 * n * N, N - 1) * immersion_degree_exact(E, ell)


def fano_lhs_exact(E: BundleData) -> Fraction:
    """Left side of the Fano obstruction inequality with ``L = -K``."""
    M = E.manifold
    a = M.anticanonical
    n, h0, r = M.n, E.h0, E.rank
    num = n * h0 * E.c1 * a ** (n - 1) * M.top
    den = r * (h0 - r) * a ** n * M.top
    return Fraction(num, den)


def grassmann_degree_chain(r: int, N: int) -> list[Fraction]:
    """The degree chain for ``E = U^*`` and ``L = -K = O(N)`` on G(r, N).

    Returns the successive values: the general bound, its rewriting with
    ``h0 = N`` and ``c1(U^*) = H``, and with ``H = c1(-K)/N``; all equal 2.
    """
    M = ManifoldData(r, N)
    n, top = M.n, M.top
    E = universal_dual_data(r, N)
    step1 = mainest2_exact(E, N)
    # 2 * (n N / n) * H.(NH)^{n-1} / (NH)^n
    step2 = 2 * Fraction(n * N, n) * Fraction(N ** (n - 1) * top, N ** n * top)
    # 2 * c1(-K).c1(-K)^{n-1} / c1(-K)^n
    step3 = 2 * Fraction(N ** n * top, N ** n * top)
    return [step1, step2, step3]
