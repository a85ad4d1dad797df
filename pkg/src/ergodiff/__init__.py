"""Simulation and sup-norm adaptive estimation for scalar ergodic
diffusions: invariant-density tabulation, Euler path generation, kernel
estimators, Lepski-type bandwidth selection and a Monte Carlo harness."""

__version__ = "0.1.0"

from .asymptotics import (BoundConstants, HypothesisSet, InfluenceKernel,
                          build_hypotheses, cramer_rao_point,
                          density_concentration_bound,
                          derivative_concentration_bound,
                          derivative_tail_bound, generator_apply,
                          limit_covariance, normality_check,
                          optimal_covariance, poisson_solve,
                          covariance_quadratic_form, validate_hypotheses)
from .estimators import (DriftDenominatorSpec, FunctionEstimate,
                         denominator_ridge, density_kde,
                         derivative_estimator, drift_estimator, eval_grid,
                         local_time_estimator, sup_distance,
                         weighted_drift_error)
from .config import ExperimentConfig, config_hash, load_config
from .harness import (Cell, RiskReport, derive_seed, fit_rate,
                      run_efficiency_study, run_lowerbound_corpus,
                      run_mc_risk)
from .kernels import (Kernel, kernel_by_name, kernel_from_callable,
                      make_kernel, validate_kernel)
from .lepski import (BandwidthGrid, CalibrationConstants, SelectionTrace,
                     bias_bound, build_grid, oracle_bandwidth,
                     replay_selection, select_bandwidth_simultaneous,
                     select_bandwidth_single, threshold_level,
                     variance_proxy)
from .model import (DriftModel, HolderSpec, InvariantModel, build_invariant,
                    check_holder, check_sigma_membership,
                    donsker_diagnostics, drift_from_density, strict_floor)
from .simulate import (DiffusionPath, SimConfig, path_increments,
                       read_path_binary, sample_stationary_initial,
                       simulate_path, write_path_binary)
