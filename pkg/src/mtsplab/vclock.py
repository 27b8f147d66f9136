"""Parallel time spans inferred from sequentially executed solver calls.

Only solver time counts; messages are instantaneous.  Two schedules exist:

* staged (NoRealloc, Cluster, Auction, CNP, and the centralised mechanisms):
  agents in a stage run in parallel and every stage waits for the slowest.
* pairwise (P2P): an interaction starts when both its host and guest are
  free, so disjoint pairs overlap.
"""

from __future__ import annotations

import csv
import math
from typing import Hashable, Iterable, Mapping, Sequence

from .trace import CA, ExchangeTrace


class VirtualClock:
    """Per-agent accumulated computation time with an optional global limit."""

    def __init__(self, agents: Iterable[Hashable], limit_ms: float | None = None):
        self.clocks: dict[Hashable, float] = {a: 0.0 for a in agents}
        if limit_ms is not None and limit_ms < 0:
            raise ValueError("limit must be non-negative")
        self.limit_ms = None if limit_ms is None or math.isinf(limit_ms) else float(limit_ms)

    def __getitem__(self, agent: Hashable) -> float:
        try:
            return self.clocks[agent]
        except KeyError:
            raise KeyError(f"unknown agent {agent!r}") from None

    def advance(self, agent: Hashable, ms: float) -> float:
        if ms < 0:
            raise ValueError("durations must be non-negative")
        self.clocks[agent] = self[agent] + ms
        return self.clocks[agent]

    def set(self, agent: Hashable, t: float) -> None:
        self[agent]
        self.clocks[agent] = t

    def hand_over(self, src: Hashable, dst: Hashable) -> float:
        """``dst`` resumes exactly when ``src`` finishes."""
        t = self[src]
        self.set(dst, t)
        return t

    def barrier(self, agents: Iterable[Hashable] | None = None) -> float:
        agents = list(self.clocks) if agents is None else list(agents)
        t = max(self[a] for a in agents)
        for a in agents:
            self.clocks[a] = t
        return t

    @property
    def span(self) -> float:
        return max(self.clocks.values(), default=0.0)

    def remaining(self, agent: Hashable) -> float:
        return remaining(self, agent)


def remaining(clock: VirtualClock, agent: Hashable) -> float:
    """Time left for ``agent``'s next call: limit minus its inferred clock, floored at 0."""
    if clock.limit_ms is None:
        return math.inf
    return max(0.0, clock.limit_ms - clock[agent])


def staged_span(stages: Sequence[tuple[Mapping | Sequence, float]]) -> float:
    """Sum over stages of (slowest salesman + central authority).

    Each stage is ``(per_agent, ca_duration)`` where ``per_agent`` maps agents
    (or lists them positionally) to one duration or a list of call durations.
    """
    t = 0.0
    for per_agent, ca in stages:
        values = per_agent.values() if isinstance(per_agent, Mapping) else per_agent
        ends = [t]
        for durations in values:
            e = t
            if isinstance(durations, (int, float)):
                durations = (durations,)
            for x in durations:
                if x < 0:
                    raise ValueError("durations must be non-negative")
                e = e + x
            ends.append(e)
        if ca < 0:
            raise ValueError("durations must be non-negative")
        t = max(ends) + ca
    return t


def p2p_span(
    init: Mapping[Hashable, float] | Sequence[float],
    interactions: Iterable[tuple[Hashable, Hashable, float, float, float, float]],
) -> tuple[float, dict]:
    """Span of bilateral interactions given in sequential-execution order.

    Every clock starts at the slowest initialisation.  An interaction starts
    at ``max(host, guest)``; the guest then finishes after t4+t6+t7 and the
    host after the guest plus t8.
    """
    init = dict(init) if isinstance(init, Mapping) else dict(enumerate(init))
    if any(v < 0 for v in init.values()):
        raise ValueError("durations must be non-negative")
    t0 = max(init.values(), default=0.0)
    clock = {k: t0 for k in init}
    for host, guest, t4, t6, t7, t8 in interactions:
        if host not in clock or guest not in clock:
            raise KeyError(f"unknown agent in interaction ({host!r}, {guest!r})")
        if min(t4, t6, t7, t8) < 0:
            raise ValueError("durations must be non-negative")
        start = max(clock[host], clock[guest])
        clock[host] = clock[guest] = start
        clock[guest] = clock[host] + t4 + t6 + t7
        clock[host] = clock[guest] + t8
    return max(clock.values(), default=0.0), clock


P2P_STAGES = ("P2P4", "P2P6", "P2P7", "P2P8")


def _stage_groups(calls):
    """Maximal runs of consecutive calls sharing a stage label."""
    groups: list[tuple[str, list]] = []
    for c in calls:
        if groups and groups[-1][0] == c.stage:
            groups[-1][1].append(c)
        else:
            groups.append((c.stage, [c]))
    return groups


def staged_stages(trace: ExchangeTrace) -> list[tuple[dict, float]]:
    stages = []
    for r in trace.rounds:
        for _, calls in _stage_groups(r.calls):
            per_agent: dict = {}
            ca = 0.0
            for c in calls:
                if c.agent == CA:
                    ca = ca + c.duration_ms
                else:
                    per_agent.setdefault(c.agent, []).append(c.duration_ms)
            stages.append((per_agent, ca))
    return stages


def p2p_inputs(trace: ExchangeTrace):
    init: dict = {}
    interactions = []
    for r in trace.rounds:
        if r.kind == "init":
            for c in r.calls:
                init[c.agent] = init.get(c.agent, 0.0) + c.duration_ms
            continue
        t = dict.fromkeys(P2P_STAGES, 0.0)
        for c in r.calls:
            t[c.stage] += c.duration_ms
        host, guest = r.participants
        interactions.append((host, guest, *(t[s] for s in P2P_STAGES)))
    return init, interactions


def trace_span(trace: ExchangeTrace) -> float:
    """Replay a mechanism trace through the schedule it ran under."""
    if trace.schedule == "p2p":
        init, interactions = p2p_inputs(trace)
        return p2p_span(init, interactions)[0]
    return staged_span(staged_stages(trace))


def span_breakdown(trace: ExchangeTrace) -> list[dict]:
    """Inferred start time of every solver call: rows of round, agent, stage, start, duration."""
    rows = []
    if trace.schedule == "p2p":
        init, _ = p2p_inputs(trace)
        t0 = max(init.values(), default=0.0)
        clock: dict = {k: t0 for k in init}
        for r in trace.rounds:
            if r.kind == "init":
                for c in r.calls:
                    rows.append(_row(r.index, c, 0.0))
                continue
            host, guest = r.participants
            t = max(clock[host], clock[guest])
            by_stage = {c.stage: c for c in r.calls}
            ends = {}
            for stage in P2P_STAGES:
                c = by_stage.get(stage)
                if c is not None:
                    rows.append(_row(r.index, c, t))
                    t = t + c.duration_ms
                ends[stage] = t
            clock[guest] = ends["P2P7"]
            clock[host] = ends["P2P8"]
        return rows

    t = 0.0
    for r in trace.rounds:
        for _, calls in _stage_groups(r.calls):
            agent_t: dict = {}
            ends = [t]
            salesmen = [c for c in calls if c.agent != CA]
            for c in salesmen:
                start = agent_t.get(c.agent, t)
                rows.append(_row(r.index, c, start))
                agent_t[c.agent] = start + c.duration_ms
            ends.extend(agent_t.values())
            t = max(ends)
            for c in calls:
                if c.agent == CA:
                    rows.append(_row(r.index, c, t))
                    t = t + c.duration_ms
    return rows


def _row(index, call, start) -> dict:
    return {
        "round": index,
        "agent": call.agent,
        "stage": call.stage,
        "start": start,
        "duration": call.duration_ms,
    }


def write_breakdown_csv(rows: Sequence[dict], path) -> None:
    """Write rows to a path or an open text stream."""
    if hasattr(path, "write"):
        _write_rows(rows, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(rows, fh)


def _write_rows(rows, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=["round", "agent", "stage", "start", "duration"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
