"""Standardness of tail filtrations of finite Markov chains and Bratteli diagrams."""
from .errors import FiltlabError, InputError, NoCoupling, NumericError, OracleMismatch
from .transport import (CouplingPlan, Semimetric, brute_force_transport, discrete_metric,
                        kantorovich, line_metric, total_variation)
from .model import (MarkovModel, bernoulli, build_model, cotransitions, ergodicity_diagnostic,
                    level_marginal, load_model, pascal, stationary, symmetric, telescope)
from .iteration import (FunctionSpec, InitialMetricSpec, IterationReport, concentration_check,
                        decide_standardness, iterate, transfer_semimetric)
from .trees import (EquippedTree, build_tree, canonical_form, coupling_distance,
                    criterion_check, criterion_report, martingale_distance, quotient_criterion)
from .invariants import InvariantFingerprint, finitely_isomorphic, fingerprint
from .shadow import (DistanceMatrixSample, EmpiricalDistanceLaw, exchangeability_check,
                     sample_matrix_distribution, shadow_stabilization, two_point_law)

__version__ = "0.1.0"
