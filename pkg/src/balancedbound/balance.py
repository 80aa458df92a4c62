"""Balanced bases: drive the integrated moment map to zero.

Two solvers share the :class:`BalanceState` result type:

* :func:`solve_balanced`, the Gram fixed-point iteration ``s <- G^{-1/2} s``;
* :func:`kempf_ness_descent`, steepest descent on SL(N)/SU(N) using the
  Kempf-Ness value of the Gieseker point as a local surrogate objective.

The residual is ``R = int mu_G(phi_s) omega^n/n! = i (G - (r/N) vol I)`` and
convergence is measured by ``|R| / vol`` in the Killing norm.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import grassmannian as gr
from .bundle import SectionEnsemble, check_sl, normalize_det
from .quadrature import integrate

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
COND_MAX = 1e12


class BalanceNotConverged(RuntimeError):
    """Raised when a solver stops without meeting its tolerance.

    Failure to balance is evidence about the Gieseker point, not a stability
    verdict.  ``history`` holds the residual trajectory.
    """

    def __init__(self, message, state, history):
        super().__init__(message)
        self.state = state
        self.history = history


class IllConditionedGram(BalanceNotConverged):
    pass


@dataclass
class BalanceState:
    transform: np.ndarray
    gram: np.ndarray
    residual: np.ndarray
    residual_norm: float
    iteration: int
    converged: bool = False
    tol: float = DEFAULT_TOL
    method: str = "fixed_point"
    history: list = field(default_factory=list)

    def to_dict(self):
        return {"method": self.method, "iteration": self.iteration, "converged": self.converged,
                "tol": self.tol, "residual_norm": self.residual_norm,
                "transform": _complex_to_lists(self.transform),
                "gram": _complex_to_lists(self.gram)}


def _complex_to_lists(M):
    M = np.asarray(M)
    return {"real": M.real.tolist(), "imag": M.imag.tolist()}


def gram_matrix(ens: SectionEnsemble, transform=None, workers: int = 1) -> np.ndarray:
    """``G_jk = int k_s(s_j, s_k) omega^n/n!`` for the basis ``transform @ s``."""
    A = ens.A if transform is None else transform @ ens.A
    G = integrate(ens.grid, gr.projector(A), workers=workers)
    return 0.5 * (G + G.conj().T)


def moment_residual(G, vol: float, r: int) -> np.ndarray:
    N = G.shape[0]
    return 1j * (G - (r / N) * vol * np.eye(N))


def statistical_tolerance(ens: SectionEnsemble, transform=None) -> float:
    """Three standard errors of ``|R| / vol`` on a Monte Carlo grid; zero otherwise."""
    if ens.grid.kind != "monte_carlo":
        return 0.0
    A = ens.A if transform is None else transform @ ens.A
    F = gr.moment_map(A, check=False)
    _, err = integrate(ens.grid, F, return_error=True)
    return float(3.0 * np.sqrt(np.sum(err ** 2)) / ens.grid.volume)


def default_tolerance(ens: SectionEnsemble, transform=None) -> float:
    return max(DEFAULT_TOL, statistical_tolerance(ens, transform))


def _hermitian_power(G, p):
    w, V = np.linalg.eigh(G)
    return (V * w ** p) @ V.conj().T


def solve_balanced(ens: SectionEnsemble, tol: float | None = None, max_iter: int = 500,
                   cond_max: float = COND_MAX, workers: int = 1) -> BalanceState:
    """Gram fixed-point iteration toward an omega-balanced basis.

    Each step replaces the basis by ``c G^{-1/2} s`` with ``c`` fixing
    ``det = 1``; the accumulated transform is returned in the state.
    """
    N, r = ens.N, ens.r
    vol = ens.grid.volume
    T = np.eye(N, dtype=complex)
    if tol is None:
        tol = default_tolerance(ens)
    history = []
    state = None
    for it in range(max_iter + 1):
        G = gram_matrix(ens, T, workers)
        R = moment_residual(G, vol, r)
        norm = float(np.sqrt(gr.killing_norm_sq(R)) / vol)
        history.append({"iteration": it, "residual_norm": norm, "objective": float("nan"),
                        "step_size": 1.0 if it else 0.0})
        state = BalanceState(T, G, R, norm, it, norm < tol, tol, "fixed_point", history)
        logger.debug("fixed point %d: residual %.3e", it, norm)
        if norm < tol:
            return state
        if it == max_iter:
            break
        eig = np.linalg.eigvalsh(G)
        if eig[0] <= 0 or eig[-1] / eig[0] > cond_max:
            raise IllConditionedGram(f"Gram matrix condition {eig[-1] / max(eig[0], 1e-300):.3e} "
                                     f"exceeds {cond_max:.1e}", state, history)
        step = _hermitian_power(G, -0.5)
        T = normalize_det(step @ T)
    raise BalanceNotConverged(f"no balanced basis after {max_iter} iterations "
                              f"(residual {state.residual_norm:.3e}, tol {tol:.3e})",
                              state, history)


# ---------------------------------------------------------------------------
# Kempf-Ness

def kempf_ness_value(ens: SectionEnsemble, g=None) -> float:
    """``sum_I int |det (g^{-1} A)_I|^2 / det(A^* A) omega^n/n!``.

    The integrand is the squared norm of ``g^{-1} T_E`` on the wedge basis,
    measured with ``det k_s``; at ``g = I`` it is identically 1.
    """
    A = ens.A
    if g is not None:
        g = check_sl(g)
        A = np.linalg.solve(g, A)
    minors = gr.plucker_embed(A, check=False)
    num = np.sum(np.abs(minors) ** 2, axis=-1)
    den = gr.wedge_norm_sq(ens.A)
    return float(integrate(ens.grid, num / den))


def kempf_ness_gradient(ens: SectionEnsemble) -> np.ndarray:
    """Hermitian gradient of ``log kempf_ness_value(exp(tH))`` at ``g = I``.

    Equals ``-(2/vol)(G - (r/N) vol I) = (2i/vol) R``; the directional
    derivative along a traceless Hermitian ``H`` is ``Re tr(grad H)``.
    """
    vol = ens.grid.volume
    G = gram_matrix(ens)
    return -(2.0 / vol) * (G - (ens.r / ens.N) * vol * np.eye(ens.N))


def kempf_ness_functional(ens: SectionEnsemble, transform) -> float:
    """``(1/vol) int log(det(A^* T^* T A) / det(A^* A))``: convex on SL(N)/SU(N)."""
    B = transform @ ens.A
    ratio = gr.wedge_norm_sq(B) / gr.wedge_norm_sq(ens.A)
    return float(integrate(ens.grid, np.log(ratio)) / ens.grid.volume)


def _expm_hermitian(H, t):
    w, V = np.linalg.eigh(H)
    return (V * np.exp(t * w)) @ V.conj().T


def kempf_ness_descent(ens: SectionEnsemble, tol: float | None = None, max_iter: int = 2000,
                       armijo: float = 1e-4, min_step: float = 1e-12) -> BalanceState:
    """Steepest descent along Hermitian directions of SL(N)/SU(N).

    At the current basis ``B`` the direction is ``H = G_B/vol - (r/N) I``
    (the moment residual up to ``i vol``) and a step is ``B <- exp(-tH) B``.
    ``log kempf_ness_value`` of the current ensemble majorizes the change of
    :func:`kempf_ness_functional` and has the same slope, so an Armijo
    decrease of the former guarantees a decrease of the latter.
    """
    from .bundle import apply_transform

    N, r = ens.N, ens.r
    vol = ens.grid.volume
    if tol is None:
        tol = default_tolerance(ens)
    T = np.eye(N, dtype=complex)
    t0 = N / (2.0 * r)
    history = []
    cur = ens
    objective = 0.0
    for it in range(max_iter + 1):
        G = gram_matrix(cur)
        R = moment_residual(G, vol, r)
        norm = float(np.sqrt(gr.killing_norm_sq(R)) / vol)
        state = BalanceState(T, G, R, norm, it, norm < tol, tol, "kempf_ness", history)
        if norm < tol:
            history.append({"iteration": it, "residual_norm": norm, "objective": objective,
                            "step_size": 0.0})
            return state
        if it == max_iter:
            break
        H = G / vol - (r / N) * np.eye(N)
        H = 0.5 * (H + H.conj().T)
        slope = 2.0 * float(np.real(np.trace(H @ H)))
        t = t0
        while True:
            g = normalize_det(_expm_hermitian(H, t))
            surrogate = np.log(kempf_ness_value(cur, g) / vol)
            if surrogate <= -armijo * t * slope:
                break
            t *= 0.5
            if t < min_step:
                history.append({"iteration": it, "residual_norm": norm, "objective": objective,
                                "step_size": t})
                raise BalanceNotConverged("Kempf-Ness line search underflow", state, history)
        step = np.linalg.inv(g)
        T = normalize_det(step @ T)
        cur = apply_transform(ens, T)
        objective = kempf_ness_functional(ens, T)
        history.append({"iteration": it, "residual_norm": norm, "objective": objective,
                        "step_size": t})
    raise BalanceNotConverged(f"Kempf-Ness descent did not converge in {max_iter} steps",
                              state, history)


def write_convergence_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "residual_norm", "objective", "step_size"])
        for row in history:
            w.writerow([row["iteration"], format(row["residual_norm"], ".17g"),
                        format(row["objective"], ".17g"), format(row["step_size"], ".17g")])
