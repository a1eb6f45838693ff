"""Randomized first-order lower bound instances, resisting oracle and experiments."""
from ._kernels import BACKEND
from .events import (EventTrace, ProjectionTracker, StateError, Verdict, check_g_implies_e,
                     check_oracle_responses, g_threshold, observe_round,
                     projection_bound_diagnostic)
from .harness import (ExperimentConfig, SummaryStats, cap_probability_experiment,
                      emit_results, estimate_P_E, queries_to_epsilon, run_lemma_suite, sweep)
from .instance import (DomainError, HardInstance, ReferenceSolution, build_instance,
                       certify_not_suboptimal, evaluate, load_instance, reference_solution,
                       save_instance)
from .optimizers import available_algorithms, run_algorithm
from .oracle import OracleResponse, QueryLedger, resisting_query, subgradient_validity_check
from .vecspace import (OrthonormalBasis, gram_schmidt_residual, project, project_perp,
                       sample_haar_orthonormal, sample_unit_sphere)

__version__ = "0.1.0"
