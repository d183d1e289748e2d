"""Secure resource allocation for downlink PD-NOMA HetNets.

Joint power and subcarrier assignment maximizing the sum secrecy rate under
per-BS budgets, pairing limits, legitimate-SIC feasibility and SIC avoidance
at the eavesdroppers, with a worst-case robust variant for imperfect
eavesdropper CSI and a monotonic-optimization global oracle for optimality
gaps.
"""

from .asm import AsmOptions, SolverReport, initialize, run, run_baseline_sic_eve
from .assignment import (SearchBudget, SizeError, exhaustive_search,
                         mads_search, objective_at)
from .dc_power import (DcLinearization, SubproblemError, eval_g, eval_h,
                       eval_im, eval_phi, linearize, linearize_h,
                       linearize_phi, solve_power_subproblem)
from .experiments import ExperimentSpec, compare, run_experiment
from .network import (NetworkConfig, NetworkInstance, SchemaError,
                      db_to_watts, gain_from_geometry, generate, load,
                      make_instance, save, serialize)
from .polyblock import (CanonicalProblem, PolyblockResult,
                        UnsupportedConfigError, bisection_project,
                        canonicalize, polyblock_solve, solve_global)
from .rates import (RateModel, eave_sinr, secrecy_rate, sic_avoidance_psi,
                    sic_feasibility_q, sum_secrecy_objective,
                    sum_secrecy_rate, user_sinr)
from .robust import RobustView, build_robust_view, solve_robust

__version__ = "0.1.0"

__all__ = [
    "AsmOptions", "SolverReport", "initialize", "run", "run_baseline_sic_eve",
    "SearchBudget", "SizeError", "exhaustive_search", "mads_search",
    "objective_at", "DcLinearization", "SubproblemError", "eval_g", "eval_h",
    "eval_im", "eval_phi", "linearize", "linearize_h", "linearize_phi",
    "solve_power_subproblem", "ExperimentSpec", "compare", "run_experiment",
    "NetworkConfig", "NetworkInstance", "SchemaError", "db_to_watts",
    "gain_from_geometry", "generate", "load", "make_instance", "save",
    "serialize", "CanonicalProblem", "PolyblockResult",
    "UnsupportedConfigError", "bisection_project", "canonicalize",
    "polyblock_solve", "solve_global", "RateModel", "eave_sinr",
    "secrecy_rate", "sic_avoidance_psi", "sic_feasibility_q",
    "sum_secrecy_objective", "sum_secrecy_rate", "user_sinr", "RobustView",
    "build_robust_view", "solve_robust",
]
