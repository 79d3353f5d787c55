"""Optimal dual-channel promotion of product adoption on social networks.

Deterministic solvers for the exact subset-resolved dynamics on small
networks, reduced systems for complete networks (finite and infinite),
the infinite line, and two-group populations, plus a stochastic
agent-based simulator for validation.
"""

from .core import (ConfigError, Economics, GridMismatchError, OptimalSolution,
                   PromotionPolicy, ResponseForm, ResponseModel, TimeGrid,
                   Trajectory, UndefinedBaselineError, delta_pi, profit)
from .networks import (CompleteHomogeneous, GeneralNetwork,
                       HeteroCompleteTwoGroups, InfiniteComplete, InfiniteLine,
                       complete_as_general, network_from_json,
                       network_to_json, ring_as_general)
from .master import SubsetIndex, adoption_level, solve_master
from .solvers import (BvpProblem, BvpResult, ConvergenceError, SolverConfig,
                      UnsupportedDimensionError, rk4_integrate, shoot, sweep)
from .montecarlo import SimConfig, SimResult, ValidationReport, simulate, validate_policy
from .opt_general import solve_optimal_general
from .opt_complete import solve_optimal_complete
from .opt_infcomplete import solve_optimal_infcomplete, sweep_delta_pi_vs_T
from .opt_line import solve_optimal_line
from .opt_hetero import (solve_optimal_hetero_targeted,
                         solve_optimal_hetero_uniform)

__version__ = "0.1.0"

__all__ = [
    "BvpProblem", "BvpResult", "CompleteHomogeneous", "ConfigError",
    "ConvergenceError", "Economics", "GeneralNetwork", "GridMismatchError",
    "HeteroCompleteTwoGroups", "InfiniteComplete", "InfiniteLine",
    "OptimalSolution", "PromotionPolicy", "ResponseForm", "ResponseModel",
    "SimConfig", "SimResult", "SolverConfig", "SubsetIndex", "TimeGrid",
    "Trajectory", "ValidationReport", "simulate", "validate_policy",
    "UndefinedBaselineError", "UnsupportedDimensionError", "adoption_level",
    "complete_as_general", "delta_pi", "network_from_json", "network_to_json",
    "profit", "ring_as_general", "rk4_integrate", "shoot",
    "solve_master", "solve_optimal_complete", "solve_optimal_general",
    "solve_optimal_hetero_targeted", "solve_optimal_hetero_uniform",
    "solve_optimal_infcomplete", "solve_optimal_line", "sweep",
    "sweep_delta_pi_vs_T",
]
