"""Quadrature grids on CP^n and G(r, N) for Kahler volume forms.

Every base manifold is treated as a Grassmannian G(r_M, N_M) (CP^n is
G(1, n+1)) covered by the affine charts ``U_I``.  A grid stores, per point,
the chart index, the affine coordinates ``Z``, the coefficient matrix of the
Kahler form in those coordinates and a weight approximating ``omega^n / n!``.

Two grid kinds exist:

* ``deterministic`` (CP^1 only): Gauss-Legendre in the polar angle times a
  uniform rule in longitude;
* ``monte_carlo``: i.i.d. Gaussian Stiefel matrices, i.e. the unitarily
  invariant measure, importance-weighted against the chart volume density.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import factorial, pi

import numpy as np
from scipy.special import gammaln

from . import grassmannian as gr

CHUNK = 8192
DEFAULT_SAMPLES = {(2, 4): 200_000, (1, 3): 50_000}


class NonPositiveMetricError(ValueError):
    def __init__(self, index, chart, coords, eigenvalue):
        self.index = index
        self.chart = chart
        self.coords = coords
        super().__init__(
            f"perturbed metric not positive at point {index} (chart {chart}, "
            f"Z={np.round(coords, 6).tolist()}): min eigenvalue {eigenvalue:.3e}")


class NonFiniteIntegrandError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectorPotential:
    """Global potential ``phi(x) = sum_k c_k t(x)^k`` with ``t(x) = tr(H P_x)``.

    ``P_x`` is the orthogonal projector of the point; with ``H`` Hermitian,
    ``t`` is a smooth real function on the Grassmannian, so ``phi`` is too.
    On CP^1 a diagonal ``H`` gives an S^1-invariant potential.
    """
    H: tuple
    coeffs: tuple

    @classmethod
    def make(cls, H, coeffs):
        H = np.asarray(H, dtype=complex)
        if not np.allclose(H, H.conj().T):
            raise ValueError("H must be Hermitian")
        return cls(tuple(map(tuple, H.tolist())), tuple(float(c) for c in coeffs))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.H, dtype=complex)

    def _t(self, A):
        P = gr.projector(A)
        return np.real(np.einsum('ij,...ji->...', self.matrix, P))

    def value(self, A) -> np.ndarray:
        return np.polynomial.polynomial.polyval(self._t(A), self.coeffs)

    def hessian(self, A, dA) -> np.ndarray:
        """Analytic complex Hessian ``d_a dbar_b phi`` at Stiefel data with chart derivatives."""
        H = self.matrix
        c = np.asarray(self.coeffs)
        t = self._t(A)
        d1 = np.polynomial.polynomial.polyder(c, 1) if c.size > 1 else np.zeros(1)
        d2 = np.polynomial.polynomial.polyder(c, 2) if c.size > 2 else np.zeros(1)
        q1 = np.polynomial.polynomial.polyval(t, d1)
        q2 = np.polynomial.polynomial.polyval(t, d2)
        dt, ddt = _trace_derivatives(H, A, dA)
        return (q2[..., None, None] * dt[..., :, None] * np.conj(dt[..., None, :])
                + q1[..., None, None] * ddt)

    def to_dict(self):
        H = self.matrix
        return {"H_real": H.real.tolist(), "H_imag": H.imag.tolist(), "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, d):
        return cls.make(np.array(d["H_real"]) + 1j * np.array(d["H_imag"]), d["coeffs"])


def _trace_derivatives(H, A, dA):
    """``d_a t`` and ``d_a dbar_b t`` for ``t = tr(H P)``, contracted without N x N stacks."""
    A = np.asarray(A, dtype=complex)
    Q, R = np.linalg.qr(A)
    Qh = np.conj(np.swapaxes(Q, -1, -2))
    perp = dA - Q[..., None, :, :] @ (Qh[..., None, :, :] @ dA)
    X = perp @ np.linalg.inv(R)[..., None, :, :]        # (I-P) dA_a R^{-1};  d_a P = X_a Q^*
    HQ = H @ Q
    dt = np.einsum('...ki,...aki->...a', np.conj(HQ), X)
    QHQ = Qh @ HQ
    Y = H @ X - X @ QHQ[..., None, :, :]
    ddt = np.einsum('...bki,...aki->...ab', np.conj(X), Y)
    return dt, ddt


@dataclass(frozen=True)
class MetricSpec:
    """``scale * omega_G + i d dbar phi`` on G(r, N); ``omega_G`` lies in ``2 pi c1(O(1))``."""
    r: int
    N: int
    scale: float = 1.0
    perturbation: ProjectorPotential | None = None

    def __post_init__(self):
        if not 1 <= self.r < self.N:
            raise ValueError(f"invalid Grassmannian G({self.r}, {self.N})")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def cp1_fs(cls, scale=1.0, perturbation=None):
        return cls(1, 2, scale, perturbation)

    @classmethod
    def cpn_fs(cls, n, scale=1.0, perturbation=None):
        return cls(1, n + 1, scale, perturbation)

    @classmethod
    def grassmann_fs(cls, r, N, scale=1.0, perturbation=None):
        return cls(r, N, scale, perturbation)

    @property
    def n(self) -> int:
        return self.r * (self.N - self.r)

    @property
    def base(self) -> str:
        if (self.r, self.N) == (1, 2):
            return "cp1_fs"
        if self.r == 1:
            return "cpn_fs"
        return "grassmann_fs"

    def volume(self) -> float:
        """Closed-form total volume ``int omega^n / n!`` (perturbations do not change it)."""
        return self.scale ** self.n * base_volume(self.r, self.N)

    def metric(self, A, dA) -> np.ndarray:
        """Coefficient matrix of the Kahler form at chart points."""
        g = self.scale * gr.logdet_hessian(A, dA)
        if self.perturbation is not None:
            g = g + self.perturbation.hessian(A, dA)
        return g

    def to_dict(self):
        return {"r": self.r, "N": self.N, "scale": self.scale,
                "perturbation": None if self.perturbation is None else self.perturbation.to_dict()}

    @classmethod
    def from_dict(cls, d):
        pert = d.get("perturbation")
        return cls(int(d["r"]), int(d["N"]), float(d["scale"]),
                   None if pert is None else ProjectorPotential.from_dict(pert))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _log_multigamma(a: float, r: int) -> float:
    """Log of the complex multivariate gamma ``pi^{r(r-1)/2} prod_i Gamma(a - i)``."""
    return r * (r - 1) / 2 * np.log(pi) + sum(gammaln(a - i) for i in range(r))


def chart_normalizer(r: int, N: int) -> float:
    """Log of ``int_{C^{m x r}} det(I + Z^*Z)^{-N} dZ`` (complex matrix-variate t integral)."""
    m = N - r
    return m * r * np.log(pi) + _log_multigamma(N - m, r) - _log_multigamma(N, r)


def base_volume(r: int, N: int) -> float:
    """Volume of G(r, N) for ``omega_G``; the chart density is ``det(I+Z^*Z)^{-N}``."""
    n = r * (N - r)
    return float(np.exp(n * np.log(2.0) + chart_normalizer(r, N)))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    spec: MetricSpec
    charts: np.ndarray          # (P,) index into multi_indices(N, r)
    coords: np.ndarray          # (P, N - r, r) affine coordinates
    weights: np.ndarray         # (P,)
    metric: np.ndarray          # (P, n, n) Hermitian coefficients of omega
    kind: str
    resolution: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))

    def chart_tuple(self, i) -> tuple[int, ...]:
        return gr.multi_indices(self.spec.N, self.spec.r)[int(self.charts[i])]

    def stiefel(self) -> np.ndarray:
        """Chart Stiefel representatives ``(I; Z)`` of all points."""
        return stiefel_from_chart(self.spec.r, self.spec.N, self.charts, self.coords)

    def chart_derivatives(self) -> np.ndarray:
        return chart_derivative_stack(self.spec.r, self.spec.N, self.charts)

    def digest(self) -> str:
        h = hashlib.sha256(self.spec.digest().encode())
        for arr in (self.charts, self.coords, self.weights):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def stiefel_from_chart(r, N, charts, coords) -> np.ndarray:
    charts = np.asarray(charts)
    coords = np.asarray(coords, dtype=complex)
    A = np.empty(coords.shape[:-2] + (N, r), dtype=complex)
    for c in np.unique(charts):
        sel = charts == c
        A[sel] = gr.reconstruct(gr.multi_indices(N, r)[int(c)], coords[sel])
    return A


def chart_derivative_stack(r, N, charts) -> np.ndarray:
    charts = np.asarray(charts)
    per_chart = {int(c): gr.chart_derivatives(N, r, gr.multi_indices(N, r)[int(c)])
                 for c in np.unique(charts)}
    n = r * (N - r)
    out = np.empty(charts.shape + (n, N, r), dtype=complex)
    for c, d in per_chart.items():
        out[charts == c] = d
    return out


def to_best_chart(A):
    """Chart index and affine coordinates maximizing ``|det A_I|`` for a stack of Stiefel data."""
    A = np.asarray(A, dtype=complex)
    N, r = A.shape[-2:]
    idx = gr.multi_indices(N, r)
    charts = np.argmax(np.abs(gr.plucker_embed(A, check=False)), axis=-1)
    coords = np.empty(A.shape[:-2] + (N - r, r), dtype=complex)
    for c in np.unique(charts):
        sel = charts == c
        I = list(idx[c])
        rest = list(gr.complement(idx[c], N))
        A1 = A[sel][:, I, :]
        A2 = A[sel][:, rest, :]
        # Z = A2 A1^{-1}
        coords[sel] = np.swapaxes(np.linalg.solve(np.swapaxes(A1, -1, -2),
                                                  np.swapaxes(A2, -1, -2)), -1, -2)
    return charts, coords


def _apply_metric(spec, charts, coords, base_weights, base_metric_scaled):
    """Reweight by the density ratio of the perturbed form; checks positivity."""
    if spec.perturbation is None:
        return base_weights, base_metric_scaled
    A = stiefel_from_chart(spec.r, spec.N, charts, coords)
    dA = chart_derivative_stack(spec.r, spec.N, charts)
    g = base_metric_scaled + spec.perturbation.hessian(A, dA)
    eig = np.linalg.eigvalsh(g)
    low = eig[:, 0]
    if np.any(low <= 0):
        i = int(np.argmin(low))
        raise NonPositiveMetricError(i, gr.multi_indices(spec.N, spec.r)[int(charts[i])],
                                     coords[i], float(low[i]))
    ratio = np.exp(np.sum(np.log(eig), axis=-1)
                   - np.sum(np.log(np.linalg.eigvalsh(base_metric_scaled)), axis=-1))
    return base_weights * ratio, g


def build_grid(spec: MetricSpec, resolution: int | None = None, kind: str | None = None,
               seed: int | None = None) -> QuadratureGrid:
    """Build a quadrature grid for ``spec``.

    For CP^1 the default is deterministic with ``resolution`` polar nodes and
    ``2 * resolution`` longitudes.  Otherwise ``resolution`` is the Monte Carlo
    sample count and ``seed`` is required.
    """
    if kind is None:
        kind = "deterministic" if (spec.r, spec.N) == (1, 2) else "monte_carlo"
    if kind == "deterministic":
        if (spec.r, spec.N) != (1, 2):
            raise ValueError("deterministic grids are only available on CP^1")
        return _cp1_product_grid(spec, 64 if resolution is None else resolution)
    if kind != "monte_carlo":
        raise ValueError(f"unknown grid kind {kind!r}")
    if seed is None:
        raise ValueError("Monte Carlo grids need a seed")
    if resolution is None:
        resolution = DEFAULT_SAMPLES.get((spec.r, spec.N), 50_000)
    if resolution < 100:
        raise ValueError("Monte Carlo grids need at least 100 samples")
    return _monte_carlo_grid(spec, resolution, seed)


def _cp1_product_grid(spec, n_theta):
    if n_theta < 1:
        raise ValueError("resolution must be >= 1")
    n_phi = 2 * n_theta
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * pi * (x + 1)
    w_theta = 0.5 * pi * wx
    phi = 2 * pi * (np.arange(n_phi) + 0.5) / n_phi
    T, Ph = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w_theta * np.sin(theta) / 2, np.full(n_phi, 2 * pi / n_phi))
    T, Ph, W = T.ravel(), Ph.ravel(), W.ravel()
    north = T <= pi / 2
    # chart (0,): A = (1, z), z = tan(theta/2) e^{i phi};  chart (1,): A = (w, 1), w = 1/z
    z = np.where(north, np.tan(T / 2) * np.exp(1j * Ph), np.exp(-1j * Ph) / np.tan(T / 2))
    charts = np.where(north, 0, 1)
    coords = z.reshape(-1, 1, 1)
    A = stiefel_from_chart(1, 2, charts, coords)
    dA = chart_derivative_stack(1, 2, charts)
    base = spec.scale * gr.logdet_hessian(A, dA)
    weights, metric = _apply_metric(spec, charts, coords, spec.scale * W, base)
    return QuadratureGrid(spec, charts, coords, weights, metric, "deterministic", n_theta)


def _monte_carlo_grid(spec, samples, seed):
    r, N, n = spec.r, spec.N, spec.n
    rng = np.random.default_rng(seed)
    A = gr.random_stiefel(N, r, size=samples, rng=rng)
    charts, coords = to_best_chart(A)
    A = stiefel_from_chart(r, N, charts, coords)
    dA = chart_derivative_stack(r, N, charts)
    base = gr.logdet_hessian(A, dA)
    # target density 2^n det(g); sampling density det(I + Z^*Z)^{-N} / normalizer
    logdet_g = np.sum(np.log(np.linalg.eigvalsh(base)), axis=-1)
    G = np.eye(r) + np.conj(np.swapaxes(coords, -1, -2)) @ coords
    log_q = -N * np.log(np.real(np.linalg.det(G))) - chart_normalizer(r, N)
    w = np.exp(n * np.log(2.0) + logdet_g - log_q) / samples
    weights, metric = _apply_metric(spec, charts, coords, spec.scale ** n * w, spec.scale * base)
    return QuadratureGrid(spec, charts, coords, weights, metric, "monte_carlo", samples, seed)


def _chunk_sums(values, workers):
    chunks = [values[i:i + CHUNK] for i in range(0, values.shape[0], CHUNK)]
    if workers and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            partial = list(ex.map(lambda c: np.sum(c, axis=0), chunks))
    else:
        partial = [np.sum(c, axis=0) for c in chunks]
    total = partial[0]
    for p in partial[1:]:
        total = total + p
    return total


def integrate(grid: QuadratureGrid, f, workers: int = 1, return_error: bool = False):
    """``sum_i f(x_i) w_i`` with a fixed chunked reduction order.

    ``f`` is an array whose leading axis runs over grid points, or a callable
    taking the grid.  With ``return_error`` the Monte Carlo standard error is
    returned as well (zero for deterministic grids).
    """
    vals = f(grid) if callable(f) else f
    vals = np.asarray(vals)
    if vals.shape[0] != grid.size:
        raise ValueError("integrand must have one value per grid point")
    bad = ~np.isfinite(vals.reshape(grid.size, -1)).all(axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonFiniteIntegrandError(
            f"non-finite integrand at point {i} (chart {grid.chart_tuple(i)}, "
            f"Z={np.round(grid.coords[i], 6).tolist()})")
    w = grid.weights.reshape((-1,) + (1,) * (vals.ndim - 1))
    terms = vals * w
    total = _chunk_sums(terms, workers)
    if not return_error:
        return total
    if grid.kind != "monte_carlo":
        return total, np.zeros_like(np.abs(total))
    P = grid.size
    err = np.sqrt(P) * np.std(terms, axis=0)
    return total, err


def volume_error(grid: QuadratureGrid) -> float:
    """Standard error of ``sum(weights)`` (zero for deterministic grids)."""
    if grid.kind != "monte_carlo":
        return 0.0
    return float(np.sqrt(grid.size) * np.std(grid.weights))


def degree_estimate(grid: QuadratureGrid):
    """``[omega/2pi]^n = n! vol / (2 pi)^n`` with its Monte Carlo standard error."""
    n = grid.n
    c = factorial(n) / (2 * pi) ** n
    return c * grid.volume, c * volume_error(grid)
