"""
Finding a balanced basis
========================

A basis of sections is balanced when the integrated moment map vanishes,
i.e. the Gram matrix of the Kodaira projector is a multiple of the identity.
Two solvers are available: the Gram fixed-point iteration and a Kempf-Ness
descent on SL(N)/SU(N).
"""
import tempfile
from pathlib import Path

import numpy as np

from balancedbound import balance as bl
from balancedbound import bundle as bd
from balancedbound import quadrature as q

grid = q.build_grid(q.MetricSpec.cp1_fs())
ens = bd.o_k_cp1(3, grid)

# %%
# Scramble the monomial basis by a random SL(4) matrix first.
rng = np.random.default_rng(3)
M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
start = bd.apply_transform(ens, bd.normalize_det(M))

fp = bl.solve_balanced(start)
print(f"fixed point: {fp.iteration} iterations, residual {fp.residual_norm:.1e}")
print("Gram diagonal:", np.round(np.diag(fp.gram).real, 10), "(2 pi / 4 each)")

# %%
# The descent tracks the convex Kempf-Ness functional, which decreases at
# every accepted step.
kn = bl.kempf_ness_descent(start)
obj = [h["objective"] for h in kn.history]
print(f"Kempf-Ness: {kn.iteration} steps, objective {obj[0]:.4f} -> {obj[-1]:.4f}")
print("same Gram:", np.allclose(fp.gram, kn.gram, atol=1e-7))

# %%
# Residual histories can be written as CSV.
path = Path(tempfile.mkdtemp()) / "convergence.csv"
bl.write_convergence_csv(fp.history, path)
print(path.read_text().splitlines()[:3])
