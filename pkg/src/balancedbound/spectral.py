"""First-eigenvalue bounds from balanced bases, and the checks behind them.

The test functions are the entries ``f_jk`` of ``F(x) = mu_G(phi(x))`` for the
Kodaira map ``phi`` of a balanced basis.  Their L2 mass is fixed pointwise by
``|F|^2 = r(N-r)/N`` and their Dirichlet energy integrates the pulled-back
form ``phi^* omega_G``, whose class is ``2 pi c1(E)``.  Summing the Rayleigh
quotients gives

    lambda_1 <= 4 pi N / (r (N - r)) * <c1(E) [omega]^{n-1}, [M]> / ((n-1)! vol).

Conventions: a Hermitian coefficient matrix ``g`` means
``omega = i g_ab dw_a ^ dw_b-bar``; then ``Delta f = -2 tr(g^{-1} d dbar f)``
and the round CP^1 of area ``2 pi`` has ``lambda_1 = 4``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, pi

import numpy as np
from scipy.linalg import eigh

from . import grassmannian as gr
from . import intersection
from .balance import BalanceState
from .bundle import SectionEnsemble
from .quadrature import CHUNK, MetricSpec, integrate, volume_error

logger = logging.getLogger(__name__)

DETERMINISTIC_GRID_TOL = 1e-8
FD_STEP = 1e-4


def grid_tolerance(grid, value: float = 1.0, error: float = 0.0) -> float:
    """Acceptance band for an integral: relative 1e-8 on deterministic grids, 3 sigma otherwise."""
    if grid.kind == "monte_carlo":
        return 3.0 * float(error)
    return DETERMINISTIC_GRID_TOL * max(1.0, abs(value))


# ---------------------------------------------------------------------------
# derivatives of the section matrices

def _fd_section_derivatives(ens: SectionEnsemble, sel=slice(None), h: float = FD_STEP):
    """``dA/dw_a`` from the section evaluator by 4th-order centred differences.

    Sections are holomorphic in the chart coordinates, so the derivative along
    the real part of ``w_a`` is the complex derivative.
    """
    grid = ens.grid
    charts = grid.charts[sel]
    Z = grid.coords[sel]
    m, r = Z.shape[-2:]
    out = np.empty(Z.shape[:-2] + (m * r, ens.N, ens.r), dtype=complex)
    for a in range(m * r):
        e = np.zeros(m * r)
        e[a] = h
        e = e.reshape(m, r)
        f1 = ens.evaluate(charts, Z + e) - ens.evaluate(charts, Z - e)
        f2 = ens.evaluate(charts, Z + 2 * e) - ens.evaluate(charts, Z - 2 * e)
        out[:, a] = (8 * f1 - f2) / (12 * h)
    return out


def section_derivatives(ens: SectionEnsemble, sel=slice(None), method: str = "analytic"):
    if method == "analytic" and ens.dA is not None:
        return ens.dA[sel]
    if method not in ("analytic", "fd"):
        raise ValueError(f"unknown derivative method {method!r}")
    return _fd_section_derivatives(ens, sel)


def _chunks(P):
    for start in range(0, P, CHUNK):
        yield slice(start, min(start + CHUNK, P))


def pulled_back_form(ens: SectionEnsemble, method: str = "analytic") -> np.ndarray:
    """Coefficients of ``phi^* omega_G = i d dbar log det(A^* A)`` at every grid point.

    A holomorphic change of frame multiplies ``det(A^*A)`` by ``|det h|^2``,
    which is pluriharmonic, so the result does not depend on the frame.
    """
    out = np.empty((ens.grid.size, ens.n, ens.n), dtype=complex)
    for sl in _chunks(ens.grid.size):
        out[sl] = gr.logdet_hessian(ens.A[sl], section_derivatives(ens, sl, method))
    return out


def metric_trace(grid, alpha) -> np.ndarray:
    """``tr_omega alpha = alpha ^ omega^{n-1} / (n-1)! / (omega^n / n!)``, pointwise."""
    return np.real(np.trace(np.linalg.solve(grid.metric, alpha), axis1=-2, axis2=-1))


def c1_pairing(ens: SectionEnsemble, method: str = "analytic", return_error: bool = False):
    """``<c1(E) [omega]^{n-1}, [M]> = (1/2pi) int phi^* omega_G ^ omega^{n-1}``."""
    n = ens.n
    tr = metric_trace(ens.grid, pulled_back_form(ens, method))
    val, err = integrate(ens.grid, tr, return_error=True)
    c = factorial(n - 1) / (2 * pi)
    if return_error:
        return float(c * val), float(c * err)
    return float(c * val)


# ---------------------------------------------------------------------------
# bounds

@dataclass
class BoundReport:
    bound_mainest: float
    bound_mainest2: float | None
    bound_bly: float | None
    degree_numeric: float
    vol: float
    components: dict
    tolerance: float = 0.0
    exact: dict = field(default_factory=dict)

    def to_dict(self):
        return {"bound_mainest": self.bound_mainest, "bound_mainest2": self.bound_mainest2,
                "bound_bly": self.bound_bly, "degree_numeric": self.degree_numeric,
                "vol": self.vol, "components": dict(self.components),
                "tolerance": self.tolerance,
                "exact": {k: str(v) for k, v in self.exact.items()}}


def mainest_value(N: int, r: int, n: int, pairing: float, vol: float) -> float:
    return 4 * pi * N / (r * (N - r)) * pairing / (factorial(n - 1) * vol)


def bly_value(n: int, N: int, d: float) -> float:
    return 4 * n * N / (N - 1) * d


def immersion_degree(ens: SectionEnsemble, form=None) -> float:
    """``d = int phi^* sigma ^ omega^{n-1} / int omega^n`` with ``sigma = phi^* omega_G / 2``."""
    if ens.r != 1:
        raise ValueError("the immersion degree is defined for line bundles")
    grid = ens.grid
    n = grid.n
    if form is None:
        form = pulled_back_form(ens)
    sigma_wedge = factorial(n - 1) * integrate(grid, metric_trace(grid, 0.5 * form))
    omega_n = factorial(n) * float(np.sum(grid.weights))
    return float(sigma_wedge / omega_n)


def _polarization_level(spec: MetricSpec):
    s = spec.scale
    return int(round(s)) if abs(s - round(s)) < 1e-12 and round(s) >= 1 else None


def bound_mainest(ens: SectionEnsemble, method: str = "analytic") -> BoundReport:
    """Assemble the eigenvalue bound and its integer and immersion-degree variants.

    ``bound_mainest2`` is filled when ``omega`` lies in ``2 pi c1(O(ell))`` for
    an integer ``ell`` and the ensemble carries intersection data;
    ``bound_bly`` is filled for line bundles.
    """
    grid = ens.grid
    N, r, n = ens.N, ens.r, ens.n
    form = pulled_back_form(ens, method)
    tr = metric_trace(grid, form)
    val, err = integrate(grid, tr, return_error=True)
    c = factorial(n - 1) / (2 * pi)
    pairing, pairing_err = float(c * val), float(c * err)
    vol = grid.volume
    vol_err = volume_error(grid)
    bound = mainest_value(N, r, n, pairing, vol)
    if grid.kind == "monte_carlo":
        # integrand and volume share samples; the ratio error uses the per-point spread
        ratio = tr - (val / vol)
        _, rerr = integrate(grid, ratio, return_error=True)
        tol = float(3.0 * bound * float(rerr) / abs(val))
    else:
        tol = DETERMINISTIC_GRID_TOL * bound
    bly = bly_value(n, N, immersion_degree(ens, form)) if r == 1 else None
    exact = {}
    m2 = None
    ell = _polarization_level(grid.spec)
    data = ens.meta.get("class_data")
    if ell is not None and data is not None:
        exact["bound_mainest2"] = intersection.mainest2_exact(data, ell)
        m2 = float(exact["bound_mainest2"])
        if r == 1:
            exact["bound_bly"] = intersection.bly_bound_exact(data, ell)
    comps = {"N": N, "r": r, "n": n, "c1_pairing": pairing,
             "c1_pairing_error": pairing_err, "vol_error": vol_err}
    return BoundReport(bound, m2, bly, pairing / (2 * pi) ** (n - 1), vol, comps, tol, exact)


# ---------------------------------------------------------------------------
# test functions

@dataclass
class TestFunctionField:
    """``F(x) = mu_G(phi(x))`` in a balanced basis and its integrated energies."""
    __test__ = False

    values: np.ndarray                # (P, N, N)
    gradient_energy: np.ndarray       # (N, N) int |grad f_jk|^2
    l2_mass: np.ndarray               # (N, N) int |f_jk|^2
    mean: np.ndarray                  # (N, N) int f_jk
    errors: dict = field(default_factory=dict)

    @property
    def total_gradient_energy(self) -> float:
        return float(np.sum(self.gradient_energy))

    @property
    def total_l2_mass(self) -> float:
        return float(np.sum(self.l2_mass))

    def rayleigh_quotients(self) -> np.ndarray:
        return self.gradient_energy / self.l2_mass

    def rayleigh_aggregate(self) -> float:
        """``sum_jk int |grad f_jk|^2 / sum_jk int |f_jk|^2``."""
        return self.total_gradient_energy / self.total_l2_mass


def _energy_density(ginv, U):
    """``sum_ab conj(U_a) g^{-1}_ab U_b`` for stacks ``U`` of shape (P, n, N, N)."""
    return np.real(np.einsum('paij,pab,pbij->pij', np.conj(U), ginv, U))


def test_functions(ens: SectionEnsemble, state: BalanceState | None = None,
                   method: str = "analytic", require_balanced: bool = True) -> TestFunctionField:
    """Moment-map test functions and their energies.

    ``|grad f|^2 = (d f)^* g^{-1} (d f) + (dbar f)^T g^{-1} conj(dbar f)``; the
    holomorphic derivative is ``d_a F = i d_a P`` and ``dbar_a F = i (d_a P)^*``.
    """
    if state is None:
        if require_balanced and not ens.meta.get("prebalanced", False):
            raise ValueError("test functions need a converged balance state "
                             "or a pre-balanced ensemble")
        T = np.eye(ens.N, dtype=complex)
    else:
        if require_balanced and not state.converged:
            raise ValueError("balance state has not converged")
        T = state.transform
    grid = ens.grid
    P, N = grid.size, ens.N
    F = np.empty((P, N, N), dtype=complex)
    dens = np.empty((P, N, N))
    for sl in _chunks(P):
        A = T @ ens.A[sl]
        dA = T @ section_derivatives(ens, sl, method)
        F[sl] = gr.moment_map(A, check=False)
        dP = gr.projector_derivative(A, dA)
        ginv = np.linalg.inv(grid.metric[sl])
        U = 1j * dP
        V = 1j * np.conj(np.swapaxes(dP, -1, -2))
        # (dbar f)^T g^{-1} conj(dbar f) = conj(V)^T-contracted with g^{-T}
        dens[sl] = _energy_density(ginv, U) + _energy_density(np.swapaxes(ginv, -1, -2), V)
    grad, grad_err = integrate(grid, dens, return_error=True)
    l2, l2_err = integrate(grid, np.abs(F) ** 2, return_error=True)
    mean, mean_err = integrate(grid, F, return_error=True)
    errors = {"gradient_energy": float(np.sqrt(np.sum(grad_err ** 2))),
              "l2_mass": float(np.sqrt(np.sum(l2_err ** 2))),
              "mean": float(np.sqrt(np.sum(np.abs(mean_err) ** 2))),
              "total_gradient_energy": float(integrate(grid, dens.sum(axis=(1, 2)),
                                                       return_error=True)[1]),
              "total_l2_mass": float(integrate(grid, (np.abs(F) ** 2).sum(axis=(1, 2)),
                                               return_error=True)[1])}
    return TestFunctionField(F, grad, l2, mean, errors)


@dataclass
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    tolerance: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
                "tolerance": self.tolerance, "passed": self.passed}


def verify_identities(ens: SectionEnsemble, state: BalanceState | None = None,
                      pairing: float | None = None, rel_tol: float = 1e-3,
                      method: str = "analytic") -> list[IdentityCheck]:
    """Check the L2 and Dirichlet-energy identities for the moment-map test functions.

    ``pairing`` defaults to the numeric c1 pairing; pass the exact value to
    test against the topological right-hand side.  The band is ``rel_tol``
    relative on deterministic grids and the larger of that and 3 sigma on
    Monte Carlo grids.
    """
    grid = ens.grid
    N, r, n = ens.N, ens.r, ens.n
    tf = test_functions(ens, state, method)
    if pairing is None:
        pairing = c1_pairing(ens, method)
    vol = float(grid.volume) if grid.kind != "monte_carlo" else grid.spec.volume()
    checks = []
    lhs = tf.total_l2_mass
    rhs = r * (N - r) / N * vol
    tol = max(rel_tol * abs(rhs), 3 * tf.errors["total_l2_mass"])
    checks.append(IdentityCheck("l2_mass", lhs, rhs, tol))
    lhs = tf.total_gradient_energy
    rhs = 4 * pi / factorial(n - 1) * pairing
    tol = max(rel_tol * abs(rhs), 3 * tf.errors["total_gradient_energy"])
    checks.append(IdentityCheck("gradient_energy", lhs, rhs, tol))
    zero_tol = (state.tol if state is not None else DETERMINISTIC_GRID_TOL) * vol
    zero_tol = max(zero_tol, 3 * tf.errors["mean"])
    checks.append(IdentityCheck("zero_mean", float(np.linalg.norm(tf.mean)), 0.0, zero_tol))
    return checks


# ---------------------------------------------------------------------------
# lambda_1 on rotationally invariant CP^1

def _area_density(spec: MetricSpec, theta):
    """Area density ``s(theta)`` with ``dA = s dtheta dphi``.

    ``z = tan(theta/2)`` on the north chart.
    """
    theta = np.asarray(theta, dtype=float)
    north = theta <= pi / 2
    # reflect the south half into the chart w = 1/z, where it looks like the north half
    half = np.where(north, theta, pi - theta) / 2
    rho = np.tan(half)
    charts = np.where(north, 0, 1)
    A = np.empty(theta.shape + (2, 1), dtype=complex)
    A[..., 0, 0] = np.where(north, 1.0, rho)
    A[..., 1, 0] = np.where(north, rho, 1.0)
    dA = np.zeros(theta.shape + (1, 2, 1), dtype=complex)
    dA[..., 0, 1, 0] = np.where(charts == 0, 1.0, 0.0)
    dA[..., 0, 0, 0] = np.where(charts == 1, 1.0, 0.0)
    g = np.real(spec.metric(A, dA)[..., 0, 0])
    if np.any(g <= 0):
        raise ValueError("metric is not positive")
    return g * rho / np.cos(half) ** 2


def _check_rotational(spec: MetricSpec, probes: int = 7):
    if spec.perturbation is None:
        return
    rng = np.random.default_rng(0)
    z = rng.uniform(0.1, 3.0, probes)
    phase = np.exp(1j * rng.uniform(0, 2 * pi, probes))
    vals = []
    for w in (z, z * phase):
        A = np.stack([np.ones_like(w), w], axis=-1)[..., None]
        dA = np.zeros(w.shape + (1, 2, 1), dtype=complex)
        dA[..., 0, 1, 0] = 1.0
        vals.append(np.real(spec.metric(A, dA)[..., 0, 0]))
    if not np.allclose(vals[0], vals[1], rtol=1e-10, atol=1e-14):
        raise ValueError("metric is not S^1-invariant")


def _fem_matrices(spec: MetricSpec, m: int, n_el: int):
    nodes = np.linspace(0.0, pi, n_el + 1)
    xg, wg = np.polynomial.legendre.leggauss(4)
    a, b = nodes[:-1, None], nodes[1:, None]
    hel = (b - a)
    th = a + 0.5 * hel * (xg + 1)                  # (n_el, 4)
    wq = 0.5 * hel * wg
    s = _area_density(spec, th)
    sin = np.sin(th)
    t = (th - a) / hel
    phi = np.stack([1 - t, t], axis=-1)             # (n_el, q, 2)
    dphi = np.stack([-1 / hel, 1 / hel], axis=-1) * np.ones_like(t)[..., None]
    Ke = (np.einsum('eq,eqi,eqj->eij', wq * sin, dphi, dphi)
          + m * m * np.einsum('eq,eqi,eqj->eij', wq / sin, phi, phi))
    Me = np.einsum('eq,eqi,eqj->eij', wq * s, phi, phi)
    K = np.zeros((n_el + 1, n_el + 1))
    M = np.zeros((n_el + 1, n_el + 1))
    for i in range(2):
        for j in range(2):
            idx = np.arange(n_el)
            np.add.at(K, (idx + i, idx + j), Ke[:, i, j])
            np.add.at(M, (idx + i, idx + j), Me[:, i, j])
    return K, M


def _mode_eigenvalue(spec, m, n_el):
    K, M = _fem_matrices(spec, m, n_el)
    if m == 0:
        # natural boundary; the constant mode gives the zero eigenvalue
        w = eigh(K, M, eigvals_only=True, subset_by_index=[0, 1])
        return w[1]
    K, M = K[1:-1, 1:-1], M[1:-1, 1:-1]
    return eigh(K, M, eigvals_only=True, subset_by_index=[0, 0])[0]


def lambda1_cp1(spec: MetricSpec, modes: int = 4, n_elements: int = 400,
                extrapolate: bool = True, return_modes: bool = False):
    """First nonzero Laplace eigenvalue of an S^1-invariant metric on CP^1.

    Separates ``u = f(theta) e^{i m phi}`` and solves each Sturm-Liouville
    problem ``-(sin f')' + m^2 f / sin = lambda s f`` with linear finite
    elements.  The Dirichlet energy is conformally invariant, so only the
    area density ``s`` of the metric enters.  Runs at ``n`` and ``2n``
    elements are combined by Richardson extrapolation.
    """
    if (spec.r, spec.N) != (1, 2):
        raise ValueError("lambda1_cp1 needs a metric on CP^1")
    _check_rotational(spec)
    per_mode = {}
    for m in range(modes + 1):
        coarse = _mode_eigenvalue(spec, m, n_elements)
        if extrapolate:
            fine = _mode_eigenvalue(spec, m, 2 * n_elements)
            per_mode[m] = (4 * fine - coarse) / 3
        else:
            per_mode[m] = coarse
    lam = min(v for v in per_mode.values() if v > 1e-8)
    return (lam, per_mode) if return_modes else lam


# ---------------------------------------------------------------------------
# eigenfunctions of the symmetric metric on G(r, N)

def eigenfunction_check_grassmann(r: int, N: int, points=None, h: float = 1e-3,
                                  scale: float | None = None, n_points: int = 20, seed: int = 0):
    """Max over points and entries of ``|Delta f_jk - lambda f_jk|``.

    The metric is ``scale * omega_G`` (default ``scale = N``, the class
    ``2 pi c1(-K)``), whose first eigenvalue is ``2N / scale``.  The Laplacian
    is taken by finite differences in chart coordinates made orthonormal at
    each point, where ``Delta = -(1/2) sum (d_x^2 + d_y^2)``.
    """
    if scale is None:
        scale = float(N)
    lam = 2.0 * N / scale
    if points is None:
        A = gr.random_stiefel(N, r, size=n_points, rng=seed)
        points = [gr.to_affine(a) for a in A]
    worst = 0.0
    for pt in points:
        chart, Z0 = pt.chart, np.asarray(pt.Z, dtype=complex)
        shape = Z0.shape
        A0 = gr.reconstruct(chart, Z0)
        dA0 = gr.chart_derivatives(N, r, chart)
        g = scale * gr.logdet_hessian(A0, dA0)
        C = np.linalg.cholesky(g)
        L = np.linalg.inv(C).T
        nn = g.shape[0]

        def f(w):
            Z = Z0 + (L @ w).reshape(shape)
            return gr.moment_map(gr.reconstruct(chart, Z), check=False)

        f0 = f(np.zeros(nn, dtype=complex))

        def lap(step):
            acc = np.zeros_like(f0)
            for a in range(nn):
                for e in (np.eye(nn)[a], 1j * np.eye(nn)[a]):
                    acc += (f(step * e) - 2 * f0 + f(-step * e)) / step ** 2
            return -0.5 * acc

        delta = (4 * lap(h / 2) - lap(h)) / 3
        worst = max(worst, float(np.max(np.abs(delta - lam * f0))))
    return worst


# ---------------------------------------------------------------------------
# Fano obstruction

@dataclass
class FanoReport:
    lhs: float
    verdict: str
    lhs_exact: Fraction | None = None

    def to_dict(self):
        return {"lhs": self.lhs, "verdict": self.verdict,
                "lhs_exact": None if self.lhs_exact is None else str(self.lhs_exact)}


def fano_verdict(lhs) -> str:
    """``"obstruction"`` when the left side is below 1, ``"no_obstruction"`` otherwise."""
    return "obstruction" if lhs < 1 else "no_obstruction"


def fano_obstruction(ens: SectionEnsemble | None = None, anticanonical_ratio: float | None = None,
                     class_data: intersection.BundleData | None = None,
                     lhs: float | None = None) -> FanoReport:
    """Left side of ``n h0 c1(E).c1(-K)^{n-1} / (r (h0 - r) c1(-K)^n) < 1``.

    Three inputs are accepted: an ensemble (numeric pairings on its grid, with
    ``c1(-K) = anticanonical_ratio * [omega] / 2pi``), exact class data, or a
    precomputed ``lhs``.  When both an ensemble and class data are available,
    the exact value is reported next to the numeric one.
    """
    exact = None
    if class_data is None and ens is not None:
        class_data = ens.meta.get("class_data")
    if class_data is not None:
        exact = intersection.fano_lhs_exact(class_data)
    if lhs is None and ens is not None:
        spec = ens.grid.spec
        if anticanonical_ratio is None:
            if class_data is None:
                raise ValueError("need the anticanonical class as a multiple of [omega]/2pi")
            anticanonical_ratio = class_data.manifold.anticanonical / spec.scale
        n, N, r = ens.n, ens.N, ens.r
        pairing = c1_pairing(ens)
        vol = ens.grid.volume
        lhs = (2 * pi * n * N * pairing
               / (anticanonical_ratio * r * (N - r) * factorial(n) * vol))
    if lhs is None:
        if exact is None:
            raise ValueError("nothing to evaluate")
        lhs = float(exact)
    if exact is not None and ens is None:
        lhs = float(exact)
    return FanoReport(float(lhs), fano_verdict(lhs), exact)

