"""Randomized Kaczmarz solvers for doubly-noisy linear systems.

RK, relaxed greedy RK (RGRK) and RGRK on signal-averaged measurements
(RGRK-SA), with noise generators, bound calculators and an experiment
harness.  The solver loop runs in a compiled extension when available and
falls back to numpy otherwise (see ``backend``).
"""
from ._backend import DEFAULT as backend
from .bounds import (BoundReport, compute_gamma, markov_sigma_bound, multiplicative_report,
                     perturbation_check, sigma_min_tilde, theorem1_report, theorem2_report)
from .errors import (ContractError, DomainError, GenerationError, InvariantError,
                     ParseError)
from .harness import (ExperimentSpec, GaussianSource, MatrixMarketSource, MethodConfig,
                      TrialSummary, compare_methods, median, run_trials, theta_sweep)
from .io import load_matrix_market, write_summary_csv, write_trace_csv
from .matrix import (RowMatrix, frobenius_norm_sq, min_singular_value, residual,
                     row_dot)
from .noise import (GroundTruth, MeasurementEnsemble, MultiplicativePerturbation, NoiseSpec,
                    generate_gaussian_ground_truth, make_additive_ensemble,
                    make_multiplicative_noisy, noise_offset_norm)
from .samplers import (GreedyState, SamplerKind, compute_mu, greedy_set, sample_greedy,
                       sample_norm_squared)
from .solvers import (IterateTrace, SolverConfig, WorkingSystem, kaczmarz_step,
                      relative_error, solve, solve_rgrk, solve_rgrk_sa, solve_rk)

__version__ = "0.1.0"
