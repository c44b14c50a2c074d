"""Exact branch-and-bound for QUBO with Ising-heuristic injection."""

from .kernels import BACKEND
from .model import (
    FREE,
    InteractionGraph,
    IsingModel,
    PartialAssignment,
    QuboModel,
    branch_priority,
    evaluate,
    fix_variables,
    from_ising,
    interaction_graph,
    to_ising,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FREE",
    "InteractionGraph",
    "IsingModel",
    "PartialAssignment",
    "QuboModel",
    "branch_priority",
    "evaluate",
    "fix_variables",
    "from_ising",
    "interaction_graph",
    "to_ising",
]
