"""
Running the pipeline from a config file
=======================================

The ``balancedbound`` command reads a flat ``key = value`` config, runs the
requested tasks and writes report.json plus CSV tables.  This demo drives it
through ``cli.main`` so it runs without a shell.
"""
import tempfile
from pathlib import Path

from balancedbound import cli

config = """\
manifold = grassmann
bundle = U*
tasks = bound, verify-identities, stability, fano-obstruction
[manifold]
r = 2
N = 4
[metric]
scale = 4
[grid]
resolution = 20000
seed = 11
"""

work = Path(tempfile.mkdtemp())
(work / "g24.cfg").write_text(config)

# %%
# Equivalent to: balancedbound run --config g24.cfg --out out --workers 2
code = cli.main(["run", "--config", str(work / "g24.cfg"), "--out", str(work / "out"),
                 "--workers", "2"])
print("exit code", code)
cli.main(["show-report", str(work / "out")])
print(sorted(p.name for p in (work / "out").iterdir()))
