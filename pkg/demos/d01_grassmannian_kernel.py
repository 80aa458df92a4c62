"""
The moment map of the Grassmannian
==================================

Points of G(r, N) are r-dimensional subspaces of C^N, stored as N x r
matrices of full rank.  The moment map depends only on the column span and
has constant Killing norm r(N - r)/N.
"""
import numpy as np

from balancedbound import grassmannian as gr

rng = np.random.default_rng(0)

# %%
# Ten random planes in C^4.  Their moment maps all have the same norm.
A = gr.random_stiefel(4, 2, size=10, rng=rng)
mu = gr.moment_map(A)
print("|mu|^2:", np.round(gr.killing_norm_sq(mu), 12))
print("r(N-r)/N =", 2 * 2 / 4)

# %%
# Changing the frame (right multiplication by GL(2)) does not move the point.
g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
print("frame change moves mu by", np.abs(gr.moment_map(A @ g) - mu).max())

# %%
# Plucker coordinates are the 2 x 2 minors, ordered lexicographically.
print("multi-indices:", gr.multi_indices(4, 2))
p = gr.plucker_embed(A[0])
print("Cauchy-Binet:", np.sum(abs(p) ** 2), "=", gr.wedge_norm_sq(A[0]))

# %%
# In an affine chart the Fubini-Study form is the complex Hessian of
# log det(I + Z*Z).  Its contraction with the moment map is checked by
# finite differences.
Z = gr.to_affine(A[0])
print("chart", Z.chart, "identity residual", gr.verify_omega_mu_identity(Z))
