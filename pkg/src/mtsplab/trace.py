"""Per-round exchange records and their JSON-lines form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator

CA = "CA"  # agent id of the central authority


@dataclass
class SolverCall:
    agent: int | str
    stage: str
    duration_ms: float
    optimal: bool = True


@dataclass
class RoundRecord:
    index: int
    kind: str  # "init" or "round"
    host: int | str | None = None
    participants: list = field(default_factory=list)
    offered: list = field(default_factory=list)  # [agent, city | None] pairs
    decision: str = ""
    calls: list[SolverCall] = field(default_factory=list)
    transfers: list = field(default_factory=list)  # [city, from_k, to_k]
    lengths: list[float] = field(default_factory=list)  # per salesman, after the round

    def to_json(self) -> dict:
        out = asdict(self)
        out["record"] = "round"
        return out

    @classmethod
    def from_json(cls, rec: dict) -> "RoundRecord":
        rec = dict(rec)
        rec.pop("record", None)
        rec["calls"] = [SolverCall(**c) for c in rec.get("calls", [])]
        rec["transfers"] = [tuple(t) for t in rec.get("transfers", [])]
        return cls(**rec)


@dataclass
class ExchangeTrace:
    mechanism: str
    schedule: str  # "staged" or "p2p"
    rounds: list[RoundRecord] = field(default_factory=list)

    def calls(self) -> Iterator[tuple[int, SolverCall]]:
        for r in self.rounds:
            for c in r.calls:
                yield r.index, c

    def total_duration(self) -> float:
        return sum(c.duration_ms for _, c in self.calls())

    def to_lines(self) -> list[str]:
        head = {"record": "trace", "mechanism": self.mechanism, "schedule": self.schedule}
        return [json.dumps(head)] + [json.dumps(r.to_json()) for r in self.rounds]

    @classmethod
    def from_lines(cls, lines: Iterable[str | dict]) -> "ExchangeTrace":
        trace = None
        for line in lines:
            rec = json.loads(line) if isinstance(line, str) else line
            if rec.get("record") == "trace":
                trace = cls(rec["mechanism"], rec["schedule"])
            elif rec.get("record") == "round":
                if trace is None:
                    raise ValueError("round record before trace header")
                trace.rounds.append(RoundRecord.from_json(rec))
        if trace is None:
            raise ValueError("no trace header found")
        return trace
