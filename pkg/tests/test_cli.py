import json
import subprocess
import sys

import pytest

from balancedbound import cli
from balancedbound.config import ConfigError, parse_config
from balancedbound.serialization import dumps, read_report, SchemaMismatch

CP1 = """\
# round sphere with O(2)
manifold = cp1
bundle = O(2)
tasks = balance, bound, verify-identities, lambda1-cp1
"""

CP2_MC = """\
manifold = cpn
tasks = balance, bound, stability
[manifold]
n = 2
[grid]
resolution = 3000
seed = 5
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_sections_and_aliases():
    cfg = parse_config(CP2_MC)
    assert cfg.manifold == "cpn" and cfg.manifold_n == 2
    assert cfg.grid_resolution == 3000 and cfg.grid_seed == 5
    assert cfg.grassmannian == (1, 3)


@pytest.mark.parametrize("text,line,field", [
    ("manifold = cp1\nbundel = O(1)\n", 2, "bundel"),
    ("manifold = cp1\nbundle = E8\n", 2, "bundle.name"),
    ("manifold = cp1\n\nmanifold = cp1\n", 3, "manifold.name"),
    ("manifold = torus\n", 1, "manifold.name"),
    ("manifold = cp1\nbalance.tol = tiny\n", 2, "balance.tol"),
    ("manifold = cpn\nmanifold.n = 2\n", None, "grid.seed"),
])
def test_config_errors_name_line_and_field(text, line, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "x.cfg")
    assert info.value.field == field
    assert info.value.line == line
    assert f"[{field}]" in str(info.value)


def test_digest_ignores_output_dir():
    a = parse_config(CP1 + "output.dir = a\n")
    b = parse_config(CP1 + "output.dir = b\n")
    assert a.digest() == b.digest()


def test_unknown_bundle_exits_1(tmp_path, capsys):
    p = _write(tmp_path, "manifold = cp1\nbundle = E8\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "run.cfg:2" in capsys.readouterr().err


def test_run_cp1(tmp_path):
    p = _write(tmp_path, CP1)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 0
    rep = read_report(out / "report.json")
    # O(2) gives 4 pi * 3/2 * 2 / 2 pi = 6, above lambda_1 = 4
    assert abs(rep["bounds"]["mainest"]["bound_mainest"] - 6) < 1e-8
    assert abs(rep["bounds"]["lambda1_cp1"]["lambda1"] - 4) < 1e-4
    assert all(c["passed"] for c in rep["identities"])
    for name in ("convergence.csv", "balance_state.json", "identities.csv", "rayleigh.csv",
                 "lambda1_modes.csv"):
        assert (out / name).exists()


def test_reports_byte_identical_across_workers(tmp_path):
    p = _write(tmp_path, CP2_MC)
    for w in (1, 3):
        assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / f"w{w}"),
                         "--workers", str(w)]) == 0
    a = (tmp_path / "w1" / "report.json").read_bytes()
    b = (tmp_path / "w3" / "report.json").read_bytes()
    assert a == b


def test_seed_override_changes_grid(tmp_path):
    p = _write(tmp_path, CP2_MC)
    cli.main(["run", "--config", str(p), "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", str(p), "--out", str(tmp_path / "b"), "--seed", "6"])
    ra = read_report(tmp_path / "a" / "report.json")
    rb = read_report(tmp_path / "b" / "report.json")
    assert ra["config_hash"] != rb["config_hash"]
    assert ra["residuals"]["grid"]["volume"] != rb["residuals"]["grid"]["volume"]


def test_grid_cache_roundtrip(tmp_path):
    p = _write(tmp_path, CP2_MC)
    cache = tmp_path / "cache"
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / d),
                         "--grid-cache", str(cache)]) == 0
    assert len(list(cache.glob("*.npz"))) == 1
    assert ((tmp_path / "a" / "report.json").read_bytes()
            == (tmp_path / "b" / "report.json").read_bytes())


def test_nonconvergence_exits_2(tmp_path):
    p = _write(tmp_path, "manifold = cp1\nbundle = O(3)\ntasks = balance\n"
                         "[balance]\nmax_iter = 0\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 2
    rep = read_report(out / "report.json")
    assert rep["residuals"]["balance"]["converged"] is False
    assert len(rep["residuals"]["balance"]["trajectory"]) == 1


def test_failed_verification_exits_3(tmp_path):
    p = _write(tmp_path, "manifold = cp1\ntasks = eigenfunction-check\n"
                         "[eigenfunction]\ntol = 1e-30\npoints = 2\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 3


def test_timings_only_when_requested(tmp_path):
    p = _write(tmp_path, "manifold = cp1\ntasks = bound\n")
    cli.main(["run", "--config", str(p), "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", str(p), "--out", str(tmp_path / "b"), "--record-timings"])
    assert read_report(tmp_path / "a" / "report.json")["timings"] == {}
    assert "bound" in read_report(tmp_path / "b" / "report.json")["timings"]


def test_show_report(tmp_path, capsys):
    p = _write(tmp_path, CP1)
    cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")])
    capsys.readouterr()
    assert cli.main(["show-report", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "[PASS] l2_mass" in out and "mainest" in out


def test_show_report_schema_mismatch(tmp_path, capsys):
    bad = tmp_path / "report.json"
    bad.write_text(json.dumps({"version": "0"}))
    with pytest.raises(SchemaMismatch):
        read_report(bad)
    assert cli.main(["show-report", str(bad)]) == 1
    assert "schema" in capsys.readouterr().err


def test_validate_subcommand(tmp_path, capsys):
    p = _write(tmp_path, CP1)
    assert cli.main(["validate", "--config", str(p)]) == 0
    assert "G(1,2)" in capsys.readouterr().out


def test_json_float_format():
    text = dumps({"b": 0.1, "a": float("nan"), "c": 2.0})
    assert text == '{\n  "a": null,\n  "b": 0.10000000000000001,\n  "c": 2\n}\n'


def test_module_entry_point(tmp_path):
    p = _write(tmp_path, CP1)
    res = subprocess.run([sys.executable, "-m", "balancedbound", "validate", "--config", str(p)],
                         capture_output=True, text=True)
    assert res.returncode == 0
