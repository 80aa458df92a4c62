"""Balanced bases of holomorphic bundles and first-eigenvalue bounds on Kahler manifolds."""
from .balance import (BalanceNotConverged, BalanceState, IllConditionedGram, gram_matrix,
                      kempf_ness_descent, kempf_ness_value, solve_balanced)
from .bundle import (GlobalGenerationError, SectionEnsemble, apply_transform, kodaira_map,
                     o_k_cp1, o_k_cpn, pulled_back_metric, universal_dual)
from .grassmannian import (moment_map, plucker_embed, projector, reconstruct,
                           random_stiefel, to_affine)
from .quadrature import MetricSpec, ProjectorPotential, QuadratureGrid, build_grid, integrate
from .serialization import report_schema_version
from .spectral import (BoundReport, TestFunctionField, bound_mainest, c1_pairing,
                       eigenfunction_check_grassmann, fano_obstruction, lambda1_cp1,
                       test_functions)
from .stability import (GiesekerTensor, act, diagonal_destabilizer_search, gieseker_identity,
                        gieseker_point_from_ensemble, one_ps_limit, sorted_weight_lemma_check)

__version__ = "0.1.0"
