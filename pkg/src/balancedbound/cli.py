"""Command-line front end: ``balancedbound run | validate | show-report``.

Exit codes: 0 all requested verifications passed, 1 configuration error,
2 balancing did not converge, 3 a verification failed its tolerance.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import balance as bl
from . import bundle as bd
from . import spectral as sp
from . import stability as st
from .config import ConfigError, load_config, validate
from .quadrature import build_grid, degree_estimate
from .serialization import (REPORT_SCHEMA_VERSION, SchemaMismatch, grid_cache_name,
                            load_grid, read_report, save_grid, write_csv, write_json)

logger = logging.getLogger("balancedbound")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_FAILED = 0, 1, 2, 3
NEEDS_BALANCE = {"bound", "verify-identities", "lambda1-cp1"}


def _grid(cfg, cache_dir):
    spec = cfg.metric_spec()
    r, N = cfg.grassmannian
    kind = cfg.grid_kind or ("deterministic" if (r, N) == (1, 2) else "monte_carlo")
    seed = cfg.grid_seed if kind == "monte_carlo" else None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        path = cache_dir / grid_cache_name(spec, kind, cfg.grid_resolution or 0, seed)
        if path.exists():
            logger.info("grid cache hit %s", path)
            return load_grid(path, spec)
        grid = build_grid(spec, cfg.grid_resolution, kind, seed)
        save_grid(grid, path)
        return grid
    return build_grid(spec, cfg.grid_resolution, kind, seed)


def _ensemble(cfg, grid):
    r, N = cfg.grassmannian
    if cfg.bundle == "universal_dual":
        return bd.universal_dual(r, N, grid)
    return bd.o_k_cpn(N - 1, cfg.bundle_k, grid)


def _balance(cfg, ens, workers):
    if cfg.balance_method == "kempf_ness":
        return bl.kempf_ness_descent(ens, tol=cfg.balance_tol, max_iter=cfg.balance_max_iter)
    return bl.solve_balanced(ens, tol=cfg.balance_tol, max_iter=cfg.balance_max_iter,
                             cond_max=cfg.balance_cond_max, workers=workers)


def _state_summary(state, prebalanced=False):
    if state is None:
        return {"converged": True, "prebalanced": prebalanced}
    return {"converged": state.converged, "iteration": state.iteration, "method": state.method,
            "residual_norm": state.residual_norm, "tol": state.tol, "prebalanced": prebalanced,
            "transform": state.transform, "gram": state.gram}


def execute(cfg, out_dir, workers=1, grid_cache=None, record_timings=False):
    """Run the configured tasks and write the report files; returns an exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    tasks = list(cfg.tasks)
    report = {"version": REPORT_SCHEMA_VERSION, "config_hash": cfg.digest(), "bounds": {},
              "residuals": {}, "identities": [], "stability": {}, "timings": {}}
    checks = []

    t0 = time.perf_counter()
    grid = _grid(cfg, grid_cache)
    ens = _ensemble(cfg, grid)
    timings["setup"] = time.perf_counter() - t0
    deg, deg_err = degree_estimate(grid)
    report["residuals"]["grid"] = {"kind": grid.kind, "size": grid.size, "volume": grid.volume,
                                   "volume_exact": grid.spec.volume(), "degree": deg,
                                   "degree_error": deg_err}

    prebalanced = bool(ens.meta.get("prebalanced"))
    state = None
    if "balance" in tasks or (NEEDS_BALANCE & set(tasks) and not prebalanced):
        t0 = time.perf_counter()
        try:
            state = _balance(cfg, ens, workers)
        except bl.BalanceNotConverged as exc:
            bl.write_convergence_csv(exc.history, out / "convergence.csv")
            report["residuals"]["balance"] = _state_summary(exc.state)
            report["residuals"]["balance"]["error"] = str(exc)
            report["residuals"]["balance"]["trajectory"] = [h["residual_norm"] for h in exc.history]
            write_json(report, out / "report.json")
            logger.error("balancing failed: %s", exc)
            return EXIT_NONCONVERGED
        timings["balance"] = time.perf_counter() - t0
        bl.write_convergence_csv(state.history, out / "convergence.csv")
        write_json(state.to_dict(), out / "balance_state.json")
    report["residuals"]["balance"] = _state_summary(state, prebalanced)

    bound = None
    if {"bound", "lambda1-cp1"} & set(tasks):
        t0 = time.perf_counter()
        bound = sp.bound_mainest(ens)
        report["bounds"]["mainest"] = bound.to_dict()
        if bound.bound_mainest2 is not None:
            checks.append(sp.IdentityCheck("bound_mainest_vs_mainest2", bound.bound_mainest,
                                           bound.bound_mainest2,
                                           max(bound.tolerance, 1e-8 * bound.bound_mainest2)))
        if bound.bound_bly is not None:
            checks.append(sp.IdentityCheck("bound_mainest_vs_bly", bound.bound_mainest,
                                           bound.bound_bly,
                                           max(bound.tolerance, 1e-10 * bound.bound_mainest)))
        timings["bound"] = time.perf_counter() - t0

    if "verify-identities" in tasks:
        t0 = time.perf_counter()
        tf = sp.test_functions(ens, state)
        idents = sp.verify_identities(ens, state, rel_tol=cfg.identities_rel_tol)
        checks.extend(idents)
        if bound is not None:
            checks.append(sp.IdentityCheck("rayleigh_vs_bound", tf.rayleigh_aggregate(),
                                           bound.bound_mainest,
                                           max(cfg.identities_rel_tol * bound.bound_mainest,
                                               bound.tolerance)))
        N = ens.N
        rows = [(j, k, float(tf.gradient_energy[j, k]), float(tf.l2_mass[j, k]),
                 float(tf.gradient_energy[j, k] / tf.l2_mass[j, k]) if tf.l2_mass[j, k] > 0
                 else float("nan"))
                for j in range(N) for k in range(N)]
        write_csv(out / "rayleigh.csv", ["j", "k", "gradient_energy", "l2_mass", "quotient"], rows)
        timings["verify-identities"] = time.perf_counter() - t0

    if "lambda1-cp1" in tasks:
        t0 = time.perf_counter()
        lam, modes = sp.lambda1_cp1(grid.spec, cfg.lambda1_modes, cfg.lambda1_elements,
                                    return_modes=True)
        report["bounds"]["lambda1_cp1"] = {"lambda1": lam,
                                           "modes": {str(m): v for m, v in modes.items()}}
        checks.append(_inequality("lambda1_le_bound", lam, bound.bound_mainest, bound.tolerance))
        write_csv(out / "lambda1_modes.csv", ["mode", "eigenvalue"],
                  [(m, float(v)) for m, v in modes.items()])
        timings["lambda1-cp1"] = time.perf_counter() - t0

    if "eigenfunction-check" in tasks:
        t0 = time.perf_counter()
        r, N = cfg.grassmannian
        res = sp.eigenfunction_check_grassmann(r, N, h=cfg.eigen_h, scale=cfg.scale,
                                               n_points=cfg.eigen_points, seed=cfg.eigen_seed)
        checks.append(sp.IdentityCheck("eigenfunction_residual", res, 0.0, cfg.eigen_tol))
        report["bounds"]["eigenvalue_symmetric"] = 2.0 * N / cfg.scale
        timings["eigenfunction-check"] = time.perf_counter() - t0

    if "fano-obstruction" in tasks:
        t0 = time.perf_counter()
        fano = sp.fano_obstruction(ens)
        report["bounds"]["fano_obstruction"] = fano.to_dict()
        timings["fano-obstruction"] = time.perf_counter() - t0

    if "stability" in tasks:
        t0 = time.perf_counter()
        T, resid = st.gieseker_point_from_ensemble(ens)
        verdict = st.diagonal_destabilizer_search(T, cfg.stability_bound,
                                                  cfg.stability_random_bases, cfg.stability_seed)
        report["stability"] = {"fit_residual": resid, **verdict.to_dict()}
        timings["stability"] = time.perf_counter() - t0

    report["identities"] = [c.to_dict() for c in checks]
    write_csv(out / "identities.csv", ["name", "lhs", "rhs", "residual", "tolerance", "passed"],
              [(c.name, float(c.lhs), float(c.rhs), float(c.residual), float(c.tolerance),
                str(bool(c.passed)).lower()) for c in checks])
    if record_timings:
        report["timings"] = timings
    write_json(report, out / "report.json")
    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.error("verification failed: %s", ", ".join(failed))
        return EXIT_FAILED
    return EXIT_OK


class _Inequality(sp.IdentityCheck):
    """``lhs <= rhs + tolerance``."""

    @property
    def residual(self) -> float:
        return max(0.0, self.lhs - self.rhs)


def _inequality(name, lhs, rhs, tol):
    return _Inequality(name, float(lhs), float(rhs), float(tol))


# ---------------------------------------------------------------------------

def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, grid_seed=args.seed, lines=cfg.lines)
        validate(cfg)
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output_dir
    code = execute(cfg, out, workers=args.workers, grid_cache=args.grid_cache,
                   record_timings=args.record_timings)
    print(f"report written to {Path(out) / 'report.json'} (exit {code})")
    return code


def cmd_validate(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    r, N = cfg.grassmannian
    print(f"ok: G({r},{N}), bundle {cfg.bundle}, tasks {', '.join(cfg.tasks)}")
    return EXIT_OK


def cmd_show_report(args) -> int:
    path = Path(args.report)
    if path.is_dir():
        path = path / "report.json"
    try:
        rep = read_report(path)
    except (OSError, ValueError, SchemaMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"report {path} (schema {rep['version']}, config {rep['config_hash'][:12]})")
    bal = rep["residuals"].get("balance", {})
    if bal:
        print(f"  balance: converged={bal.get('converged')} "
              f"iterations={bal.get('iteration', '-')} residual={bal.get('residual_norm', '-')}")
    for name, val in sorted(rep["bounds"].items()):
        if isinstance(val, dict) and "bound_mainest" in val:
            print(f"  {name}: bound={val['bound_mainest']} mainest2={val['bound_mainest2']} "
                  f"bly={val['bound_bly']}")
        else:
            print(f"  {name}: {val}")
    for c in rep["identities"]:
        print(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: lhs={c['lhs']} "
              f"rhs={c['rhs']} tol={c['tolerance']}")
    if rep["stability"]:
        print(f"  stability: {rep['stability']['verdict']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="balancedbound",
                                description="Balanced bases and first-eigenvalue bounds.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int)
        if name == "run":
            s.add_argument("--out")
            s.add_argument("--workers", type=int, default=1)
            s.add_argument("--grid-cache")
            s.add_argument("--record-timings", action="store_true",
                           help="store wall-clock timings in report.json (breaks byte identity)")
    s = sub.add_parser("show-report")
    s.add_argument("report", help="report.json or its directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "validate": cmd_validate, "show-report": cmd_show_report}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
