"""Context-dependent active sensing: Bayes-risk-optimal fixation/stopping
policies over belief-state MDPs, statistical baselines, approximate solvers,
and a reproducible simulation harness."""

from .approx import (GprConfig, GprModel, RbfConfig, RbfModel,
                     approx_policy_map, bellman_backup_targets,
                     gpr_value_iteration, policy_agreement, rbf_centers,
                     rbf_design, rbf_fit, rbf_value_iteration, sample_simplex,
                     select_hyperparameters)
from .baselines import (CalibrationResult, ThresholdPolicy,
                        calibrate_threshold, greedy_map_scores,
                        infomax_scores, threshold_policy_map,
                        threshold_policy_step)
from .grid import (BARYCENTRIC, NEAREST, SimplexGrid, ValueFunction,
                   enumerate_points, interpolate)
from .model import (CostParams, DegenerateModelError, FixationAction,
                    TaskSpec, belief_update, entropy, likelihood,
                    likelihood_table, predictive_obs_dist, transition_data,
                    update_all_outcomes, validate_belief)
from .simulate import (BatchReport, CompareRow, EpisodeTrace, compare,
                       run_batch, run_episode)
from .solver import (CONTINUE, STOP, ConvergenceError, PolicyMap, SolveReport,
                     bellman_residual, continuation_q, extract_policy, solve,
                     stopping_cost, stopping_cost_points, value_iteration)

__version__ = "0.1.0"
