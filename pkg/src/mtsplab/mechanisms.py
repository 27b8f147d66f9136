"""The seven allocation organisations as deterministic single-threaded engines.

Every engine starts from the instance endowment, records each solver call
(agent, protocol stage, duration) in an ``ExchangeTrace`` and caps every
call's deadline by the agent's remaining inferred parallel time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .allocation import Allocation
from .instances import Instance
from .solvers import (
    Budget,
    best_drop,
    improves,
    solve_auction_assignment,
    solve_clustering,
    solve_full_centr,
    solve_opt_decentr,
    tsp_exact,
)
from .trace import CA, ExchangeTrace, RoundRecord, SolverCall
from .vclock import VirtualClock, trace_span

MECHANISMS = ("norealloc", "p2p", "cnp", "auction", "cluster", "optdecentr", "fullcentr")
CONSTRAINED = ("norealloc", "p2p", "cnp", "auction", "cluster", "optdecentr")


@dataclass
class MechanismOutcome:
    mechanism: str
    final_allocation: Allocation
    lengths: tuple[float, ...]
    total: float
    rounds: int
    trace: ExchangeTrace
    inferred_span: float
    timed_out: bool
    optimal: bool


class _Engine:
    def __init__(self, name: str, inst: Instance, d: np.ndarray, budget: Budget | None, schedule="staged"):
        self.name = name
        self.inst = inst
        self.d = d
        self.m = inst.m
        budget = budget or Budget()
        self.deterministic = budget.deterministic
        self.clock = VirtualClock([*range(self.m), CA], budget.deadline_ms)
        self.trace = ExchangeTrace(name, schedule)
        self.groups: list[set[int]] = [set(e) for e in inst.endowment]
        self.lengths = [0.0] * self.m
        self.timed_out = False
        self.all_optimal = True

    def new_round(self, kind: str = "round", host=None) -> RoundRecord:
        rec = RoundRecord(index=len(self.trace.rounds), kind=kind, host=host)
        self.trace.rounds.append(rec)
        return rec

    def has_time(self, agent) -> bool:
        if self.clock.remaining(agent) > 0:
            return True
        self.timed_out = True
        return False

    def call(self, rec: RoundRecord, agent, stage: str, fn: Callable, *args):
        budget = Budget(self.clock.remaining(agent), deterministic=self.deterministic)
        result = fn(*args, budget)
        duration = budget.elapsed_ms()
        self.clock.advance(agent, duration)
        optimal = not budget.exhausted and getattr(result, "optimal", True)
        if not optimal:
            self.timed_out = True
            self.all_optimal = False
        rec.calls.append(SolverCall(agent, stage, duration, optimal))
        return result

    def barrier(self) -> None:
        self.clock.barrier()

    def initial_tours(self, stage: str, kind: str = "init") -> RoundRecord:
        rec = self.new_round(kind)
        rec.participants = list(range(self.m))
        for k in range(self.m):
            self.lengths[k] = self.call(rec, k, stage, tsp_exact, self.d, self.groups[k]).length
        self.barrier()
        rec.decision = "tours"
        rec.lengths = list(self.lengths)
        return rec

    def swap(self, rec: RoundRecord, a: int, city_a: int, b: int, city_b: int) -> None:
        self.groups[a].remove(city_a)
        self.groups[b].remove(city_b)
        self.groups[a].add(city_b)
        self.groups[b].add(city_a)
        rec.transfers += [(city_a, a, b), (city_b, b, a)]

    def finish(self, optimal: bool | None = None) -> MechanismOutcome:
        if self.clock.limit_ms is not None and any(self.clock.remaining(k) <= 0 for k in self.clock.clocks):
            self.timed_out = True
        if optimal is None:
            optimal = self.all_optimal and not self.timed_out
        lengths = tuple(float(x) for x in self.lengths)
        return MechanismOutcome(
            mechanism=self.name,
            final_allocation=Allocation.of(self.groups),
            lengths=lengths,
            total=float(sum(lengths)),
            rounds=sum(1 for r in self.trace.rounds if r.kind == "round"),
            trace=self.trace,
            inferred_span=trace_span(self.trace),
            timed_out=self.timed_out,
            optimal=optimal,
        )

    def round_guard(self) -> None:
        n = self.inst.n
        if len(self.trace.rounds) > 10 * self.m * n * n + 10:
            raise RuntimeError(f"{self.name} failed to terminate")


def run_no_realloc(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """Every salesman tours his own endowment; one round."""
    e = _Engine("norealloc", inst, d, budget)
    e.initial_tours("tsp", kind="round")
    return e.finish()


def _p2p_pick(e: _Engine, ledger, closed, last_host: int):
    m = e.m
    for step in range(1, m + 1):
        h = (last_host + step) % m
        if e.clock.remaining(h) <= 0:
            e.timed_out = True
            continue
        best = None
        for g in range(m):
            if g == h or (h, g) in closed:
                continue
            free = sum(1 for c in e.groups[h] if c not in ledger[h][g])
            if not free:
                continue
            if e.clock.remaining(g) <= 0:
                e.timed_out = True
                continue
            # literal reading: the counterparty with the fewest unproposed cities
            if best is None or free < best[0]:
                best = (free, g)
        if best is not None:
            return h, best[1]
    return None


def run_p2p(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """Bilateral host/guest negotiation rounds with one-for-one swaps."""
    e = _Engine("p2p", inst, d, budget, schedule="p2p")
    m = e.m
    e.initial_tours("P2P0")
    # ledger[k][j]: cities k already proposed to j
    ledger = [[set() for _ in range(m)] for _ in range(m)]
    # host -> guest pairs whose guest had nothing to offer; cleared when either side trades
    closed: set[tuple[int, int]] = set()
    clock = e.clock
    last_host = -1
    while True:
        e.round_guard()
        pick = _p2p_pick(e, ledger, closed, last_host)
        if pick is None:
            break
        h, g = pick
        last_host = h
        rec = e.new_round(host=h)
        rec.participants = [h, g]
        start = max(clock[h], clock[g])
        clock.set(h, start)
        clock.set(g, start)

        guest_drop = e.call(rec, g, "P2P4", best_drop, d, e.groups[g], ledger[g][h])
        c_g = guest_drop.dropped
        rec.offered.append([g, c_g])
        if c_g is None:
            closed.add((h, g))
            clock.hand_over(g, h)
            rec.decision = "guest_null"
            rec.lengths = list(e.lengths)
            continue
        ledger[g][h].add(c_g)

        clock.hand_over(g, h)
        host_drop = e.call(rec, h, "P2P6", best_drop, d, e.groups[h], ledger[h][g])
        c_h = host_drop.dropped
        rec.offered.append([h, c_h])
        ledger[h][g].add(c_h)

        clock.hand_over(h, g)
        guest_eval = e.call(rec, g, "P2P7", tsp_exact, d, (e.groups[g] - {c_g}) | {c_h})
        if not improves(guest_eval.length, e.lengths[g]):
            clock.hand_over(g, h)
            rec.decision = "guest_rejected"
            rec.lengths = list(e.lengths)
            continue

        clock.hand_over(g, h)
        host_eval = e.call(rec, h, "P2P8", tsp_exact, d, (e.groups[h] - {c_h}) | {c_g})
        if not improves(host_eval.length, e.lengths[h]):
            rec.decision = "host_rejected"
            rec.lengths = list(e.lengths)
            continue

        e.swap(rec, h, c_h, g, c_g)
        e.lengths[h] = host_eval.length
        e.lengths[g] = guest_eval.length
        ledger[h][g].clear()
        closed = {p for p in closed if h not in p and g not in p}
        rec.decision = "accepted"
        rec.lengths = list(e.lengths)
    return e.finish()


def run_cnp(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """Contract-net rounds: the host broadcasts a city, every other salesman bids one back."""
    e = _Engine("cnp", inst, d, budget)
    m = e.m
    e.initial_tours("CNP0")
    ledger = [[set() for _ in range(m)] for _ in range(m)]
    quiet = 0
    h = 0
    while quiet < m:
        e.round_guard()
        if not e.has_time(h):
            break
        guests = [g for g in range(m) if g != h]
        rec = e.new_round(host=h)
        rec.participants = [h, *guests]
        if not guests:
            rec.decision = "no_guests"
            rec.lengths = list(e.lengths)
            quiet += 1
            continue

        spent = {c for c in e.groups[h] if all(c in ledger[h][g] for g in guests)}
        drop = e.call(rec, h, "CNP3", best_drop, d, e.groups[h], spent)
        e.barrier()
        c_h = drop.dropped
        rec.offered.append([h, c_h])
        if c_h is None:
            rec.decision = "host_saturated"
            rec.lengths = list(e.lengths)
            quiet += 1
            h = (h + 1) % m
            continue
        for g in guests:
            ledger[h][g].add(c_h)

        proposals = []
        for g in guests:
            res = e.call(rec, g, "CNP5", best_drop, d, e.groups[g] | {c_h}, {c_h})
            # individual rationality: only bid a city whose swap shortens the bidder's tour
            if res.dropped is not None and improves(res.remaining_length, e.lengths[g]):
                proposals.append((g, res.dropped, res.remaining_length))
                rec.offered.append([g, res.dropped])
            else:
                rec.offered.append([g, None])
        e.barrier()

        winner = None
        for g, c_g, len_g in proposals:
            ev = e.call(rec, h, "CNP9", tsp_exact, d, (e.groups[h] - {c_h}) | {c_g})
            if improves(ev.length, e.lengths[h]) and (winner is None or improves(ev.length, winner[3])):
                winner = (g, c_g, len_g, ev.length)
        e.barrier()

        if winner is None:
            rec.decision = "rejected" if proposals else "no_proposal"
            quiet += 1
        else:
            g, c_g, len_g, len_h = winner
            e.swap(rec, h, c_h, g, c_g)
            e.lengths[h] = len_h
            e.lengths[g] = len_g
            ledger[h][g].clear()
            rec.decision = "accepted"
            quiet = 0
        rec.lengths = list(e.lengths)
        h = (h + 1) % m
    return e.finish()


def run_auction(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """Auctioneer rounds: everyone offers a city, bids on the others, the CA reallocates."""
    e = _Engine("auction", inst, d, budget)
    m = e.m
    e.initial_tours("A0")
    returned = [set() for _ in range(m)]  # cities the auctioneer gave back to their owner
    active = list(range(m))
    while active:
        e.round_guard()
        if not e.has_time(CA):
            break
        rec = e.new_round(host=CA)
        rec.participants = list(active)

        offers = {}
        for k in active:
            res = e.call(rec, k, "A4", best_drop, d, e.groups[k], returned[k])
            rec.offered.append([k, res.dropped])
            if res.dropped is not None:
                offers[k] = (res.dropped, res.remaining_length)
        e.barrier()
        active = [k for k in active if k in offers]
        if not offers:
            rec.decision = "closed"
            rec.lengths = list(e.lengths)
            break

        bidders = list(offers)
        savings = np.zeros((len(bidders), len(bidders)))
        tours = {}
        for a, k in enumerate(bidders):
            c_k, base = offers[k]
            savings[a, a] = e.lengths[k] - base
            for b, i in enumerate(bidders):
                if i == k:
                    continue
                tour = e.call(rec, k, "A10", tsp_exact, d, (e.groups[k] - {c_k}) | {offers[i][0]})
                tours[k, i] = tour.length
                savings[a, b] = tour.length - base
        e.barrier()

        result = e.call(rec, CA, "A14", solve_auction_assignment, savings, bidders)
        e.barrier()

        new_groups = [set(g) for g in e.groups]
        for k in bidders:
            src = result.winner[k]
            c_k = offers[k][0]
            if src == k:
                returned[k].add(c_k)
                continue
            new_groups[k].discard(c_k)
            new_groups[k].add(offers[src][0])
            rec.transfers.append((offers[src][0], src, k))
            e.lengths[k] = tours[k, src]
            returned[k].clear()
        e.groups = new_groups
        rec.decision = "returned" if result.is_identity() else "reallocated"
        rec.lengths = list(e.lengths)
    return e.finish()


def run_cluster(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """The CA clusters cities by size-constrained min-max diameter, then each salesman tours his cluster."""
    e = _Engine("cluster", inst, d, budget)
    rec = e.new_round()
    rec.host = CA
    rec.participants = list(range(e.m))
    clustering = e.call(rec, CA, "cluster", solve_clustering, d, inst.sizes)
    e.barrier()
    old = e.groups
    e.groups = [set(c) for c in clustering.clusters]
    for k in range(e.m):
        for c in sorted(e.groups[k] - old[k]):
            src = next(j for j in range(e.m) if c in old[j])
            rec.transfers.append((c, src, k))
    for k in range(e.m):
        e.lengths[k] = e.call(rec, k, "tsp", tsp_exact, d, e.groups[k]).length
    e.barrier()
    rec.decision = "clustered"
    rec.lengths = list(e.lengths)
    return e.finish()


def _centralised(name: str, solve, inst: Instance, d: np.ndarray, budget: Budget | None) -> MechanismOutcome:
    e = _Engine(name, inst, d, budget)
    rec = e.new_round()
    rec.host = CA
    rec.participants = list(range(e.m))
    sol = e.call(rec, CA, name, solve)
    e.barrier()
    old = e.groups
    e.groups = [set(g) for g in sol.allocation.groups]
    for k in range(e.m):
        for c in sorted(e.groups[k] - old[k]):
            src = next(j for j in range(e.m) if c in old[j])
            rec.transfers.append((c, src, k))
    e.lengths = [t.length for t in sol.tours]
    rec.decision = "optimal" if sol.optimal else "incumbent"
    rec.lengths = list(e.lengths)
    return e.finish(optimal=sol.optimal and not e.timed_out)


def run_opt_decentr(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """The CA solves the cardinality-constrained MTSP exactly."""
    return _centralised("optdecentr", lambda b: solve_opt_decentr(inst, d, b), inst, d, budget)


def run_full_centr(inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    """The CA solves the classical MTSP, ignoring endowments."""
    return _centralised("fullcentr", lambda b: solve_full_centr(d, inst.n, inst.m, b), inst, d, budget)


RUNNERS = {
    "norealloc": run_no_realloc,
    "p2p": run_p2p,
    "cnp": run_cnp,
    "auction": run_auction,
    "cluster": run_cluster,
    "optdecentr": run_opt_decentr,
    "fullcentr": run_full_centr,
}


def run_mechanism(name: str, inst: Instance, d: np.ndarray, budget: Budget | None = None) -> MechanismOutcome:
    try:
        runner = RUNNERS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown mechanism {name!r}; choose from {', '.join(MECHANISMS)}") from None
    return runner(inst, d, budget)
