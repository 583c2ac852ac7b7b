"""Optimal modified costs, universal taxes and approximate equilibria for congestion games."""

from .algorithm import (AlgoParams, MoveCapExceeded, ParameterInfeasible, RunResult, derive_params,
                        feasible_c, partition_blocks, run)
from .game import (CongestionGame, CostFunction, GameError, PlayerSubset, StrategyProfile,
                   best_response, player_cost, rosenthal_potential, social_cost,
                   verify_alpha_equilibrium)
from .lowerbound import DualSolution, SchedulingInstance, construct_instance, solve_lpd, verify_gap
from .lp import LinearProgram, LPError, Status, solve, solve_lazy
from .oracle import bruteforce_lambda, enumerate_equilibria, exact_poa, exact_stretch
from .smoothness import (POTENTIAL, SOCIAL_COST, SmoothnessCertificate, certificate_for_game,
                         fit_certificate, monomial_certificate, verify_certificate)
from .taxes import TaxTable, epsilon_local_search, taxes_from_certificate

__version__ = "0.1.0"

__all__ = [
    "AlgoParams", "CongestionGame", "CostFunction", "DualSolution", "GameError", "LPError",
    "LinearProgram", "MoveCapExceeded", "POTENTIAL", "ParameterInfeasible", "PlayerSubset",
    "RunResult", "SOCIAL_COST", "SchedulingInstance", "SmoothnessCertificate", "Status",
    "StrategyProfile", "TaxTable", "best_response", "bruteforce_lambda", "certificate_for_game",
    "construct_instance", "derive_params", "enumerate_equilibria", "epsilon_local_search",
    "exact_poa", "exact_stretch", "feasible_c", "fit_certificate", "monomial_certificate",
    "partition_blocks", "player_cost", "rosenthal_potential", "run", "social_cost", "solve",
    "solve_lazy", "solve_lpd", "taxes_from_certificate", "verify_alpha_equilibrium",
    "verify_certificate", "verify_gap",
]
