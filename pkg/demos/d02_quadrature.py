"""
Integrating over CP^1 and G(2, 4)
=================================

CP^1 gets a tensor Gauss-Legendre grid in polar coordinates.  Larger
Grassmannians get importance-sampled Monte Carlo grids that are exact for
invariant integrands.
"""
from math import pi

import numpy as np

from balancedbound import quadrature as q

# %%
# The round sphere of area 2 pi, and the integral of 1/(1 + |z|^2) on the
# north chart, which equals pi.
for n in (2, 4, 8, 16):
    grid = q.build_grid(q.MetricSpec.cp1_fs(), n)
    z = grid.coords[:, 0, 0]
    f = np.where(grid.charts == 0, 1 / (1 + abs(z) ** 2), abs(z) ** 2 / (1 + abs(z) ** 2))
    print(f"n={n:2d}  vol error {grid.volume - 2 * pi:+.1e}  integral error "
          f"{q.integrate(grid, f) - pi:+.1e}")

# %%
# A Monte Carlo grid on G(2, 4) needs an explicit seed.  The degree of the
# Plucker embedding comes out as 2.
grid = q.build_grid(q.MetricSpec.grassmann_fs(2, 4), 20_000, seed=1)
deg, err = q.degree_estimate(grid)
print(f"G(2,4) degree {deg:.12f} +- {err:.1e}")

# %%
# A perturbed metric omega + i d dbar phi reweights the same samples.  The
# volume only depends on the class, so it stays within the error bars.
pert = q.ProjectorPotential.make(np.diag([0.3, -0.1, 0.0, -0.2]), [0.0, 1.0])
grid = q.build_grid(q.MetricSpec.grassmann_fs(2, 4, perturbation=pert), 20_000, seed=1)
print(f"perturbed volume {grid.volume:.4f} +- {q.volume_error(grid):.4f}, "
      f"exact {grid.spec.volume():.4f}")
