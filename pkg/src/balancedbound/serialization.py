"""Report files, CSV tables and the grid cache.

Floats are written with 17 significant digits so every value round-trips;
non-finite floats become ``null``.  Keys are sorted, so equal inputs give
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .quadrature import MetricSpec, QuadratureGrid

REPORT_SCHEMA_VERSION = "1"
GRID_CACHE_VERSION = 1


class SchemaMismatch(ValueError):
    pass


def report_schema_version() -> str:
    return REPORT_SCHEMA_VERSION


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode({"real": obj.real, "imag": obj.imag}, indent, level)
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def read_report(path) -> dict:
    """Load a report and insist on the current schema version."""
    data = json.loads(Path(path).read_text())
    version = data.get("version") if isinstance(data, dict) else None
    if version != REPORT_SCHEMA_VERSION:
        raise SchemaMismatch(f"{path}: report schema {version!r}, expected "
                             f"{REPORT_SCHEMA_VERSION!r}")
    return data


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])


# ---------------------------------------------------------------------------
# grid cache

def grid_cache_name(spec: MetricSpec, kind: str, resolution: int, seed) -> str:
    return f"grid-{spec.digest()}-{kind}-{resolution}-{seed}.npz"


def save_grid(grid: QuadratureGrid, path) -> Path:
    header = {"version": GRID_CACHE_VERSION, "spec": grid.spec.to_dict(),
              "spec_hash": grid.spec.digest(), "kind": grid.kind,
              "resolution": grid.resolution, "seed": grid.seed}
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), charts=grid.charts,
                 coords=grid.coords, weights=grid.weights, metric=grid.metric)
    return path


def load_grid(path, spec: MetricSpec | None = None) -> QuadratureGrid:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("version") != GRID_CACHE_VERSION:
            raise SchemaMismatch(f"{path}: grid cache version {header.get('version')!r}, "
                                 f"expected {GRID_CACHE_VERSION}")
        cached = MetricSpec.from_dict(header["spec"])
        if cached.digest() != header["spec_hash"]:
            raise SchemaMismatch(f"{path}: corrupt grid cache header")
        if spec is not None and spec.digest() != cached.digest():
            raise SchemaMismatch(f"{path}: cached grid belongs to a different metric")
        return QuadratureGrid(cached, z["charts"], z["coords"], z["weights"], z["metric"],
                              header["kind"], int(header["resolution"]), header["seed"])
