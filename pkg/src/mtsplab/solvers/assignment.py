"""Auctioneer's allocation of proposed cities under individual rationality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .budget import Budget
from .tsp import REL_TOL


@dataclass(frozen=True)
class Assignment:
    winner: dict  # participant -> participant whose proposed city he receives
    objective: float

    def is_identity(self) -> bool:
        return all(k == i for k, i in self.winner.items())


def _as_matrix(savings, participants):
    if isinstance(savings, Mapping):
        if participants is None:
            participants = sorted({k for k, _ in savings})
        labels = list(participants)
        mat = np.array([[savings.get((k, i), math.inf) for i in labels] for k in labels], dtype=float)
        return labels, mat
    mat = np.asarray(savings, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("savings must be a square matrix")
    labels = list(range(mat.shape[0])) if participants is None else list(participants)
    if len(labels) != mat.shape[0]:
        raise ValueError("one participant label per savings row")
    return labels, mat


def solve_auction_assignment(
    savings: Sequence[Sequence[float]] | np.ndarray | Mapping,
    participants: Sequence | None = None,
    budget: Budget | None = None,
) -> Assignment:
    """Minimum-total injective assignment with ``s[k][w(k)] <= s[k][k]`` for all k.

    ``savings[k][i]`` is the extra length salesman k travels if he receives the
    city proposed by participant i.  The identity is always feasible; it wins
    any tie, and remaining ties go to the lexicographically smallest winner
    vector.  If ``budget`` cannot cover the work the identity is returned.
    """
    labels, s = _as_matrix(savings, participants)
    p = len(labels)
    if p == 0:
        return Assignment({}, 0.0)
    budget = budget or Budget()
    diag = np.diag(s)
    identity = float(diag.sum())
    if not budget.afford((1 << p) * p * p):
        return Assignment({lab: lab for lab in labels}, identity)

    allowed = [[s[k, i] <= s[k, k] for i in range(p)] for k in range(p)]
    rows = s.tolist()

    # tail[mask]: cheapest way to serve rows popcount(mask).. with columns outside mask
    full = (1 << p) - 1
    tail = [math.inf] * (1 << p)
    tail[full] = 0.0
    for mask in range(full - 1, -1, -1):
        k = mask.bit_count()
        best = math.inf
        row = rows[k]
        for i in range(p):
            if not mask >> i & 1 and allowed[k][i]:
                v = row[i] + tail[mask | 1 << i]
                if v < best:
                    best = v
        tail[mask] = best

    optimum = tail[0]
    tol = REL_TOL * max(1.0, abs(identity))
    if identity <= optimum + tol:
        return Assignment({labels[k]: labels[k] for k in range(p)}, identity)

    winner = {}
    mask = 0
    acc = 0.0
    for k in range(p):
        row = rows[k]
        for i in range(p):
            if mask >> i & 1 or not allowed[k][i]:
                continue
            if acc + row[i] + tail[mask | 1 << i] <= optimum + tol:
                winner[labels[k]] = labels[i]
                acc += row[i]
                mask |= 1 << i
                break
    return Assignment(winner, acc)
