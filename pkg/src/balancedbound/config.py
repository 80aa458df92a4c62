"""Run configuration: flat ``key = value`` text with dotted keys.

Example::

    # round CP^1 with O(1)
    manifold.name = cp1
    bundle.name = O(1)
    tasks = balance, bound

``[section]`` headers prefix the keys that follow them.  Blank lines and
``#`` comments are ignored.  Every error names the line and the field.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .quadrature import MetricSpec, ProjectorPotential

TASKS = ("balance", "bound", "verify-identities", "lambda1-cp1", "eigenfunction-check",
         "stability", "fano-obstruction")
MANIFOLDS = ("cp1", "cpn", "grassmann")
BUNDLES = ("o_k", "universal_dual")


class ConfigError(ValueError):
    def __init__(self, message, line=None, field=None, source="<config>"):
        self.line = line
        self.field = field
        where = source if line is None else f"{source}:{line}"
        what = f" [{field}]" if field else ""
        super().__init__(f"{where}:{what} {message}")


@dataclass
class RunConfig:
    manifold: str = "cp1"
    manifold_n: int | None = None
    manifold_r: int | None = None
    manifold_N: int | None = None
    scale: float = 1.0
    perturbation_diag: tuple | None = None
    perturbation_coeffs: tuple | None = None
    bundle: str = "o_k"
    bundle_k: int = 1
    grid_kind: str | None = None
    grid_resolution: int | None = None
    grid_seed: int | None = None
    balance_method: str = "fixed_point"
    balance_tol: float | None = None
    balance_max_iter: int = 500
    balance_cond_max: float = 1e12
    tasks: tuple = ("balance", "bound")
    output_dir: str = "out"
    stability_bound: int = 4
    stability_random_bases: int = 10
    stability_seed: int = 0
    lambda1_modes: int = 4
    lambda1_elements: int = 400
    eigen_points: int = 50
    eigen_h: float = 1e-3
    eigen_tol: float = 1e-3
    eigen_seed: int = 0
    identities_rel_tol: float = 1e-3
    source: str = field(default="<config>", compare=False)
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def grassmannian(self) -> tuple[int, int]:
        if self.manifold == "cp1":
            return 1, 2
        if self.manifold == "cpn":
            return 1, self.manifold_n + 1
        return self.manifold_r, self.manifold_N

    def metric_spec(self) -> MetricSpec:
        r, N = self.grassmannian
        pert = None
        if self.perturbation_diag is not None:
            pert = ProjectorPotential.make(np.diag(self.perturbation_diag),
                                           self.perturbation_coeffs or (0.0, 1.0))
        return MetricSpec(r, N, self.scale, pert)

    def canonical(self) -> dict:
        """Fields that affect results (output location excluded)."""
        d = asdict(self)
        for k in ("source", "lines", "output_dir"):
            d.pop(k)
        return d

    def digest(self) -> str:
        text = repr(sorted(self.canonical().items()))
        return hashlib.sha256(text.encode()).hexdigest()


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _tasks(v):
    return tuple(t.strip() for t in v.split(",") if t.strip())


def _bundle(v):
    s = v.strip()
    m = re.fullmatch(r"[Oo]\((\d+)\)", s)
    if m:
        return ("o_k", int(m.group(1)))
    if s in ("U*", "u*", "universal_dual"):
        return ("universal_dual", None)
    if s == "o_k":
        return ("o_k", None)
    raise ValueError(f"unknown bundle {s!r} (expected O(k), o_k or universal_dual)")


KEYS = {
    "manifold.name": ("manifold", str),
    "manifold.n": ("manifold_n", _int),
    "manifold.r": ("manifold_r", _int),
    "manifold.N": ("manifold_N", _int),
    "metric.scale": ("scale", _float),
    "metric.perturbation.diag": ("perturbation_diag", _floats),
    "metric.perturbation.coeffs": ("perturbation_coeffs", _floats),
    "bundle.name": ("bundle", _bundle),
    "bundle.k": ("bundle_k", _int),
    "grid.kind": ("grid_kind", str),
    "grid.resolution": ("grid_resolution", _int),
    "grid.seed": ("grid_seed", _int),
    "balance.method": ("balance_method", str),
    "balance.tol": ("balance_tol", _float),
    "balance.max_iter": ("balance_max_iter", _int),
    "balance.cond_max": ("balance_cond_max", _float),
    "tasks": ("tasks", _tasks),
    "output.dir": ("output_dir", str),
    "stability.bound": ("stability_bound", _int),
    "stability.random_bases": ("stability_random_bases", _int),
    "stability.seed": ("stability_seed", _int),
    "lambda1.modes": ("lambda1_modes", _int),
    "lambda1.elements": ("lambda1_elements", _int),
    "eigenfunction.points": ("eigen_points", _int),
    "eigenfunction.h": ("eigen_h", _float),
    "eigenfunction.tol": ("eigen_tol", _float),
    "eigenfunction.seed": ("eigen_seed", _int),
    "identities.rel_tol": ("identities_rel_tol", _float),
}


def parse_config(text: str, source: str = "<config>", validate_config: bool = True) -> RunConfig:
    cfg = RunConfig(source=source)
    section = ""
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, None, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if section:
            key = f"{section}.{key}"
        if key == "manifold":
            key = "manifold.name"
        if key == "bundle":
            key = "bundle.name"
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, key, source)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", lineno, key, source)
        seen[key] = lineno
        attr, conv = KEYS[key]
        try:
            val = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", lineno, key, source) from None
        if attr == "bundle":
            name, k = val
            cfg.bundle = name
            if k is not None:
                cfg.bundle_k = k
        else:
            setattr(cfg, attr, val)
        cfg.lines[attr] = lineno
    if validate_config:
        validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(path)) from None
    return parse_config(text, str(path))


def validate(cfg: RunConfig) -> RunConfig:
    def fail(msg, attr, key):
        raise ConfigError(msg, cfg.lines.get(attr), key, cfg.source)

    if cfg.manifold not in MANIFOLDS:
        fail(f"unknown manifold {cfg.manifold!r} (expected one of {', '.join(MANIFOLDS)})",
             "manifold", "manifold.name")
    if cfg.manifold == "cpn" and (cfg.manifold_n is None or cfg.manifold_n < 1):
        fail("cpn needs manifold.n >= 1", "manifold_n", "manifold.n")
    if cfg.manifold == "grassmann":
        if cfg.manifold_r is None or cfg.manifold_N is None:
            fail("grassmann needs manifold.r and manifold.N", "manifold", "manifold.name")
        if not 1 <= cfg.manifold_r < cfg.manifold_N:
            fail("need 1 <= r < N", "manifold_r", "manifold.r")
    r, N = cfg.grassmannian
    if cfg.bundle not in BUNDLES:
        fail(f"unknown bundle {cfg.bundle!r}", "bundle", "bundle.name")
    if cfg.bundle == "o_k":
        if r != 1:
            fail("O(k) is only built in on projective spaces", "bundle", "bundle.name")
        if cfg.bundle_k < 1:
            fail("need k >= 1", "bundle_k", "bundle.k")
    if not cfg.scale > 0:
        fail("scale must be positive", "scale", "metric.scale")
    if cfg.perturbation_diag is not None and len(cfg.perturbation_diag) != N:
        fail(f"perturbation needs {N} diagonal entries", "perturbation_diag",
             "metric.perturbation.diag")
    if cfg.perturbation_coeffs is not None and cfg.perturbation_diag is None:
        fail("coefficients given without metric.perturbation.diag", "perturbation_coeffs",
             "metric.perturbation.coeffs")
    kind = cfg.grid_kind
    if kind is None:
        kind = "deterministic" if (r, N) == (1, 2) else "monte_carlo"
    if kind not in ("deterministic", "monte_carlo"):
        fail(f"unknown grid kind {kind!r}", "grid_kind", "grid.kind")
    if kind == "deterministic" and (r, N) != (1, 2):
        fail("deterministic grids exist only on cp1", "grid_kind", "grid.kind")
    if kind == "monte_carlo" and cfg.grid_seed is None:
        fail("Monte Carlo grids need grid.seed (or --seed)", "grid_seed", "grid.seed")
    if cfg.grid_resolution is not None and cfg.grid_resolution < 1:
        fail("resolution must be positive", "grid_resolution", "grid.resolution")
    if not cfg.tasks:
        fail("at least one task is required", "tasks", "tasks")
    for t in cfg.tasks:
        if t not in TASKS:
            fail(f"unknown task {t!r} (expected some of {', '.join(TASKS)})", "tasks", "tasks")
    if "lambda1-cp1" in cfg.tasks and cfg.manifold != "cp1":
        fail("lambda1-cp1 needs manifold cp1", "tasks", "tasks")
    if cfg.balance_method not in ("fixed_point", "kempf_ness"):
        fail(f"unknown balance method {cfg.balance_method!r}", "balance_method", "balance.method")
    if cfg.balance_max_iter < 0:
        fail("max_iter must be >= 0", "balance_max_iter", "balance.max_iter")
    if cfg.stability_bound < 1:
        fail("stability bound must be >= 1", "stability_bound", "stability.bound")
    if cfg.eigen_points < 1:
        fail("need at least one sample point", "eigen_points", "eigenfunction.points")
    return cfg
