"""
Gieseker points and one-parameter subgroups
===========================================

A balanced basis exists exactly when the Gieseker point is stable.  This
demo fits the Gieseker tensor of U* from its sections and searches diagonal
one-parameter subgroups for a destabilizer.
"""
from balancedbound import bundle as bd
from balancedbound import quadrature as q
from balancedbound import stability as st

grid = q.build_grid(q.MetricSpec.grassmann_fs(2, 4), 2000, seed=0)
T, resid = st.gieseker_point_from_ensemble(bd.universal_dual(2, 4, grid))
print(f"fit residual {resid:.1e}; tensor is the identity of Lambda^2 C^4")

# %%
# No diagonal 1-PS has a limit on the identity: every weight vector puts
# negative weight on some column.
v = st.diagonal_destabilizer_search(T, bound=3, random_bases=5)
print(v.verdict, "over", v.lattice_size, "weights, conclusive:", v.conclusive)

# %%
# A tensor supported on the single column e_0 ^ e_1 is sent to zero by
# weights that are positive on the first two coordinates.
bad = st.supported_tensor(2, 4, [(0, 1)])
v = st.diagonal_destabilizer_search(bad, bound=2)
print(v.verdict, "m =", v.m, "unstable:", v.unstable)

# %%
# The key combinatorial fact: sorted nonzero zero-sum weights have a positive
# leading partial sum.
ok = all(st.sorted_weight_lemma_check(m, r)
         for m in st.sorted_weight_lattice(5, 4) for r in range(1, 5))
print("partial-sum lemma on the lattice:", ok)
