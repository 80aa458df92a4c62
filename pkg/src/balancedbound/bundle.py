"""Globally generated bundles presented by their sections on a grid.

A :class:`SectionEnsemble` stores, at every grid point, the ``N x r`` matrix
``A(x)`` of the sections ``s_j = sum_alpha a_{j alpha} sigma_alpha`` in a
local holomorphic frame.  ``A(x)`` is a Stiefel matrix for the Kodaira map,
so everything downstream only ever needs these pointwise matrices (plus, for
derivative quantities, their holomorphic chart derivatives).

Basis changes act on rows: the basis ``s' = g s`` has matrices ``A' = g A``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from math import comb
from pathlib import Path
from typing import Callable

import numpy as np

from . import grassmannian as gr
from . import intersection
from .quadrature import QuadratureGrid, chart_derivative_stack, stiefel_from_chart

ENSEMBLE_FORMAT_VERSION = 1


class GlobalGenerationError(ValueError):
    """Sections fail to span the fibre at some point."""


@dataclass(frozen=True, eq=False)
class SectionEnsemble:
    grid: QuadratureGrid
    A: np.ndarray                       # (P, N, r)
    labels: tuple[str, ...]
    meta: dict = field(default_factory=dict)
    dA: np.ndarray | None = None        # (P, n, N, r) holomorphic chart derivatives
    evaluator: Callable | None = None   # (charts, coords) -> (P, N, r)

    @property
    def N(self) -> int:
        return self.A.shape[-2]

    @property
    def r(self) -> int:
        return self.A.shape[-1]

    @property
    def n(self) -> int:
        return self.grid.n

    def evaluate(self, charts, coords) -> np.ndarray:
        if self.evaluator is None:
            name = self.meta.get("description", "")
            raise ValueError(f"ensemble {name!r} has no section evaluator")
        return self.evaluator(charts, coords)


def check_sl(g, tol: float = 1e-10) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("basis transform must be square")
    if abs(np.linalg.det(g) - 1) >= tol:
        raise ValueError(f"basis transform must have det 1, got {np.linalg.det(g):.6g}")
    return g


def normalize_det(g) -> np.ndarray:
    """Rescale an invertible matrix into SL(N)."""
    g = np.asarray(g, dtype=complex)
    return g / np.linalg.det(g) ** (1.0 / g.shape[0])


def validate(ens: SectionEnsemble) -> SectionEnsemble:
    if ens.N <= ens.r:
        raise ValueError(f"need N > r, got N={ens.N}, r={ens.r}")
    if ens.A.shape[0] != ens.grid.size:
        raise ValueError("ensemble and grid sizes differ")
    try:
        gr.check_rank(ens.A)
    except gr.DegenerateStiefelError as exc:
        raise GlobalGenerationError(f"sections do not generate the fibre: {exc}") from None
    return ens


def kodaira_map(ens: SectionEnsemble, x: int) -> np.ndarray:
    """Stiefel matrix of the Kodaira map at grid point ``x``."""
    A = ens.A[x]
    try:
        return gr.check_rank(A)
    except gr.DegenerateStiefelError:
        raise GlobalGenerationError(f"sections do not generate the fibre at point {x}") from None


def pulled_back_metric(ens: SectionEnsemble, x=None) -> np.ndarray:
    """``K(x)_{jk} = k_s(s_j, s_k)(x)``, the orthogonal projector ``A (A^*A)^{-1} A^*``."""
    A = ens.A if x is None else kodaira_map(ens, x)
    return gr.projector(A)


def apply_transform(ens: SectionEnsemble, g) -> SectionEnsemble:
    """Ensemble of the basis ``g s`` (rows of ``A`` mix by ``g``)."""
    g = check_sl(g)
    evaluator = None
    if ens.evaluator is not None:
        base = ens.evaluator
        evaluator = lambda charts, coords: g @ base(charts, coords)  # noqa: E731
    dA = None if ens.dA is None else g @ ens.dA
    meta = dict(ens.meta)
    meta["prebalanced"] = False
    return replace(ens, A=g @ ens.A, dA=dA, evaluator=evaluator, meta=meta)


# ---------------------------------------------------------------------------
# built-in bundles

def _homogeneous(charts, coords, N_M):
    """Homogeneous coordinates of CP^{N_M - 1} points from chart data (chart coordinate = 1)."""
    return stiefel_from_chart(1, N_M, charts, coords)[..., 0]


def _monomial_exponents(n: int, k: int) -> np.ndarray:
    exps = []
    for combo in combinations_with_replacement(range(n + 1), k):
        e = [0] * (n + 1)
        for i in combo:
            e[i] += 1
        exps.append(e)
    return np.array(exps, dtype=int)


def o_k_cpn(n: int, k: int, grid: QuadratureGrid) -> SectionEnsemble:
    """Degree-``k`` monomial sections of ``O(k)`` on CP^n, ``N = C(n+k, k)``."""
    if k < 1 or n < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if (grid.spec.r, grid.spec.N) != (1, n + 1):
        raise ValueError(f"grid is not on CP^{n}")
    exps = _monomial_exponents(n, k)
    N = len(exps)
    assert N == comb(n + k, k)

    def evaluate(charts, coords):
        v = _homogeneous(charts, coords, n + 1)
        return np.prod(v[..., None, :] ** exps, axis=-1)[..., None]

    v = _homogeneous(grid.charts, grid.coords, n + 1)
    A = np.prod(v[:, None, :] ** exps, axis=-1)[..., None]
    # d/dv_i of v^e = e_i v^(e - delta_i);  chart coordinate a is v_{rest[a]}
    dv = np.zeros((grid.size, n, N), dtype=complex)
    idx = gr.multi_indices(n + 1, 1)
    for c in np.unique(grid.charts):
        sel = grid.charts == c
        rest = gr.complement(idx[int(c)], n + 1)
        for a, i in enumerate(rest):
            e = exps.copy()
            coef = e[:, i].astype(float)
            e[:, i] = np.maximum(e[:, i] - 1, 0)
            dv[sel, a, :] = coef * np.prod(v[sel][:, None, :] ** e, axis=-1)
    dA = dv[..., None]
    labels = tuple("*".join(f"z{i}^{p}" if p > 1 else f"z{i}" for i, p in enumerate(e) if p) or "1"
                   for e in exps)
    pert = grid.spec.perturbation is None
    meta = {"n": n, "r": 1, "N": N, "description": f"O({k}) on CP^{n}",
            "bundle": "o_k_cpn", "k": k, "frame": "chart coordinate set to 1",
            "prebalanced": pert and k == 1,
            "class_data": intersection.line_bundle_cpn(n, k)}
    return validate(SectionEnsemble(grid, A, labels, meta, dA, evaluate))


def o_k_cp1(k: int, grid: QuadratureGrid) -> SectionEnsemble:
    """Sections ``1, z, ..., z^k`` of ``O(k)`` on CP^1."""
    return o_k_cpn(1, k, grid)


def universal_dual(r: int, N: int, grid: QuadratureGrid) -> SectionEnsemble:
    """``U^*`` on G(r, N): ``A(x)`` is the Stiefel matrix of ``x`` itself, ``h^0 = N``."""
    if (grid.spec.r, grid.spec.N) != (r, N):
        raise ValueError(f"grid is not on G({r}, {N})")

    def evaluate(charts, coords):
        return stiefel_from_chart(r, N, charts, coords)

    A = grid.stiefel()
    dA = chart_derivative_stack(r, N, grid.charts)
    meta = {"n": r * (N - r), "r": r, "N": N, "description": f"U^* on G({r},{N})",
            "bundle": "universal_dual", "frame": "dual of chart columns (I; Z)",
            "prebalanced": grid.spec.perturbation is None,
            "class_data": intersection.universal_dual_data(r, N)}
    labels = tuple(f"e{j}^*" for j in range(N))
    return validate(SectionEnsemble(grid, A, labels, meta, dA, evaluate))


def determinant_basis(ens: SectionEnsemble) -> SectionEnsemble:
    """Basis of ``H^0(det E)`` for built-ins, in the frame ``det sigma``.

    Line bundles use their own sections; ``U^*`` uses the Plucker coordinates.
    """
    kind = ens.meta.get("bundle")
    if ens.r == 1:
        return ens
    if kind == "universal_dual":
        P = gr.plucker_embed(ens.A, check=False)[..., None]
        K = P.shape[-2]
        labels = tuple("p" + "".join(map(str, I)) for I in gr.multi_indices(ens.N, ens.r))
        meta = {"n": ens.n, "r": 1, "N": K, "description": "Plucker sections of O(1)",
                "bundle": "plucker"}
        return SectionEnsemble(ens.grid, P, labels, meta)
    raise ValueError("no built-in determinant basis for this ensemble")


# ---------------------------------------------------------------------------
# import / export

def save_ensemble(ens: SectionEnsemble, stem) -> tuple[Path, Path]:
    """Write ``<stem>.npy`` (P x N x r complex) and a JSON sidecar."""
    stem = Path(stem)
    data = stem.with_suffix(".npy")
    side = stem.with_suffix(".json")
    np.save(data, np.ascontiguousarray(ens.A))
    info = {"version": ENSEMBLE_FORMAT_VERSION, "N": ens.N, "r": ens.r,
            "grid_hash": ens.grid.digest(), "labels": list(ens.labels),
            "description": ens.meta.get("description", "")}
    if ens.dA is not None:
        np.save(stem.with_name(stem.name + "_dA.npy"), np.ascontiguousarray(ens.dA))
        info["derivatives"] = stem.name + "_dA.npy"
    side.write_text(json.dumps(info, indent=2, sort_keys=True))
    return data, side


def load_ensemble(stem, grid: QuadratureGrid) -> SectionEnsemble:
    stem = Path(stem)
    info = json.loads(stem.with_suffix(".json").read_text())
    if info.get("version") != ENSEMBLE_FORMAT_VERSION:
        raise ValueError(f"unsupported ensemble format version {info.get('version')!r}")
    if info["grid_hash"] != grid.digest():
        raise ValueError("ensemble was evaluated on a different grid")
    A = np.load(stem.with_suffix(".npy"))
    if A.shape != (grid.size, info["N"], info["r"]):
        raise ValueError(f"ensemble array has shape {A.shape}, sidecar says "
                         f"({grid.size}, {info['N']}, {info['r']})")
    dA = None
    if "derivatives" in info:
        dA = np.load(stem.with_name(info["derivatives"]))
    meta = {"n": grid.n, "r": info["r"], "N": info["N"],
            "description": info.get("description", ""), "bundle": "imported", "prebalanced": False}
    return validate(SectionEnsemble(grid, A, tuple(info["labels"]), meta, dA))
