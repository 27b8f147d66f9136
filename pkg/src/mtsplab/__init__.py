"""Selfish salesmen exchanging cities: exact solvers, negotiation mechanisms and a benchmark harness."""

from .allocation import Allocation
from .instances import Instance, distance_matrix, generate_instance, load_ch130, load_tsplib, parse_tsplib
from .mechanisms import MECHANISMS, MechanismOutcome, run_mechanism
from .solvers import Budget

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "Budget",
    "Instance",
    "MECHANISMS",
    "MechanismOutcome",
    "distance_matrix",
    "generate_instance",
    "load_ch130",
    "load_tsplib",
    "parse_tsplib",
    "run_mechanism",
]
