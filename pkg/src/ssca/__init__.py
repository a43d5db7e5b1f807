"""Stochastic successive convex approximation with exact-penalty slacks."""

from .core import (BlockStructure, Box, CallableComponent, ConvexComponent, LogQuadratic, PenaltyConfig,
                   PenalizedProblem, ProjectionSet, StochasticProblem, affine, penalize, project, quadratic,
                   split_blocks)
from .driver import (RunConfig, RunResult, IterateTrace, multi_restart, objective_estimate, run_parallel_ssca,
                     run_ssca, stationarity_check)
from .subproblem import InnerSolverConfig, SubproblemSolution, solve_block_subproblem, solve_subproblem
from .surrogate import StepsizeSchedule, SurrogateState, empty_state, surrogate_update

__all__ = [
    "BlockStructure", "Box", "CallableComponent", "ConvexComponent", "LogQuadratic", "PenaltyConfig",
    "PenalizedProblem", "ProjectionSet", "StochasticProblem", "affine", "penalize", "project", "quadratic",
    "split_blocks", "RunConfig", "RunResult", "IterateTrace", "multi_restart", "objective_estimate",
    "run_parallel_ssca", "run_ssca", "stationarity_check", "InnerSolverConfig", "SubproblemSolution",
    "solve_block_subproblem", "solve_subproblem", "StepsizeSchedule", "SurrogateState", "empty_state",
    "surrogate_update",
]
