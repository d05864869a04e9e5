"""Group zero-norm regularized robust regression.

A proximal majorization-minimization driver whose convex subproblems are
solved in the dual by a semismooth Newton method. A proximal ADMM baseline
and a synthetic benchmark harness come along for comparison.
"""
from .data import (CovarianceKind, NoiseKind, SyntheticSpec, gen_covariance, gen_noise,
                   gen_truth, make_synthetic, parse_libsvm, sample_design, write_libsvm)
from .dual_ssn import SubproblemSpec, ppa_solve, sncg_solve
from .padmm import AdmmConfig, admm_run
from .pmm import PmmConfig, PmmTrace, init_point, kkt_residual, pmm_run
from .problem import (GroupStructure, ProblemData, RegularizerSpec, Truth, eval_potential,
                      eval_surrogate_objective, eval_true_objective)
from .surrogate import PhiFamily, psi_star, psi_star_prime, varphi_rho, weights

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig", "CovarianceKind", "GroupStructure", "NoiseKind", "PhiFamily", "PmmConfig",
    "PmmTrace", "ProblemData", "RegularizerSpec", "SubproblemSpec", "SyntheticSpec", "Truth",
    "admm_run", "eval_potential", "eval_surrogate_objective", "eval_true_objective",
    "gen_covariance", "gen_noise", "gen_truth", "init_point", "kkt_residual", "make_synthetic",
    "parse_libsvm", "pmm_run", "ppa_solve", "psi_star", "psi_star_prime", "sample_design",
    "sncg_solve", "varphi_rho", "weights", "write_libsvm",
]
