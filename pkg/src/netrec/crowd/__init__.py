"""Crowd avoidance: spreading assignments over items under an occupancy cap."""

from .assign import (
    Assignment,
    InfeasibleError,
    RankMatrix,
    assign_hungarian,
    assign_local,
    assign_mpo,
    assign_sa,
    delta_rank,
    effective_items,
)
from .experiment import (
    CROWD_COLUMNS,
    SOLVERS,
    CrowdResult,
    CrowdRow,
    dense_subset,
    precision_gains,
    run_crowd,
    solve,
)

__all__ = [
    "Assignment",
    "InfeasibleError",
    "RankMatrix",
    "assign_hungarian",
    "assign_local",
    "assign_mpo",
    "assign_sa",
    "delta_rank",
    "effective_items",
    "CROWD_COLUMNS",
    "SOLVERS",
    "CrowdResult",
    "CrowdRow",
    "dense_subset",
    "precision_gains",
    "run_crowd",
    "solve",
]
