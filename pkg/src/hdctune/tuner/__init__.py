"""Constrained Bayesian search over encoder configurations."""

from .pareto import ParetoFront, brute_force_front, dominates, pareto_insert
from .search import (
    Constraints,
    SearchSpace,
    Theta,
    TrialRecord,
    best_feasible,
    evaluate,
    read_log,
    run,
    suggest,
    train_and_score,
)

__all__ = [
    "Constraints",
    "ParetoFront",
    "SearchSpace",
    "Theta",
    "TrialRecord",
    "best_feasible",
    "brute_force_front",
    "dominates",
    "evaluate",
    "pareto_insert",
    "read_log",
    "run",
    "suggest",
    "train_and_score",
]
