from .assignment import Assignment, solve_auction_assignment
from .budget import STEPS_PER_MS, Budget
from .partition import (
    AllocationSolution,
    Clustering,
    cluster_diameter,
    solve_clustering,
    solve_full_centr,
    solve_opt_decentr,
)
from .tsp import (
    DropSolution,
    SubsetTable,
    TableCapExceeded,
    TourSolution,
    best_drop,
    improves,
    subset_tour_table,
    tour_length,
    tsp_exact,
)

__all__ = [
    "Assignment",
    "AllocationSolution",
    "Budget",
    "Clustering",
    "DropSolution",
    "STEPS_PER_MS",
    "SubsetTable",
    "TableCapExceeded",
    "TourSolution",
    "best_drop",
    "cluster_diameter",
    "improves",
    "solve_auction_assignment",
    "solve_clustering",
    "solve_full_centr",
    "solve_opt_decentr",
    "subset_tour_table",
    "tour_length",
    "tsp_exact",
]
