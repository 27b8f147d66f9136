"""Campaign runner, persistence and ratio statistics.

A campaign directory holds ``manifest.json`` and one JSON-lines file per
cell at ``cells/<mechanism>/m<m>_n<n>/s<shift>.jsonl``: a result record
followed by the exchange trace.  Cells already on disk are skipped, so an
interrupted campaign resumes where it stopped.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from .instances import ENDOWMENT_RULE, City, distance_matrix, generate_instance, load_ch130, load_tsplib
from .mechanisms import MECHANISMS, run_mechanism
from .solvers import Budget
from .trace import ExchangeTrace

log = logging.getLogger(__name__)

QUANTILE_RULE = "lower empirical quantile: sorted[ceil(p*len) - 1], no interpolation"
BASELINES = ("optdecentr", "fullcentr")
DEFAULT_M = (2, 3)
DEFAULT_N = tuple(range(8, 15))
DEFAULT_LIMIT_MS = 30_000.0


class ConfigError(ValueError):
    pass


@dataclass
class CampaignConfig:
    source: str | None = None  # TSPLIB file; None means the bundled CH130
    mechanisms: Sequence[str] = MECHANISMS
    m_values: Sequence[int] = DEFAULT_M
    n_values: Sequence[int] = DEFAULT_N
    shifts: Sequence[int] = tuple(range(130))
    limit_ms: float | None = DEFAULT_LIMIT_MS  # None is unbounded
    out: str = "campaign"
    deterministic: bool = False
    jobs: int = 1

    def validate(self) -> None:
        if not self.mechanisms or not self.m_values or not self.n_values or not self.shifts:
            raise ConfigError("mechanism, m, n and shift selections must be non-empty")
        unknown = [x for x in self.mechanisms if x not in MECHANISMS]
        if unknown:
            raise ConfigError(f"unknown mechanisms {unknown}; choose from {', '.join(MECHANISMS)}")
        if self.limit_ms is not None and not self.limit_ms > 0:
            raise ConfigError("limit must be positive or unbounded")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        size = len(_source_cities(self.source))
        for n in self.n_values:
            if not 2 <= n <= size:
                raise ConfigError(f"n={n} outside 2..{size}")
            for m in self.m_values:
                if not 1 <= m <= n - 1:
                    raise ConfigError(f"m={m} infeasible for n={n}")

    def cells(self) -> list[tuple[str, int, int, int]]:
        return [
            (mech, m, n, s)
            for mech in self.mechanisms
            for m in self.m_values
            for n in self.n_values
            for s in self.shifts
        ]


@dataclass
class ResultRecord:
    mechanism: str
    m: int
    n: int
    shift: int
    total: float
    lengths: list[float]
    rounds: int
    inferred_span: float
    timed_out: bool
    optimal: bool

    @property
    def key(self) -> tuple[str, int, int, int]:
        return self.mechanism, self.m, self.n, self.shift

    def to_json(self) -> dict:
        return {"record": "result", **asdict(self)}

    @classmethod
    def from_json(cls, rec: dict) -> "ResultRecord":
        rec = {k: v for k, v in rec.items() if k != "record"}
        return cls(**rec)


class CampaignResult(list):
    """Records of every cell, plus bookkeeping on what this invocation did."""

    def __init__(self, records=(), executed=0, failed=None):
        super().__init__(records)
        self.executed = executed
        self.failed: list[dict] = failed or []


@lru_cache(maxsize=8)
def _source_cities(source: str | None) -> tuple[City, ...]:
    return tuple(load_ch130() if source is None else load_tsplib(source))


def cell_path(out, mechanism: str, m: int, n: int, shift: int) -> Path:
    return Path(out) / "cells" / mechanism / f"m{m}_n{n}" / f"s{shift:03d}.jsonl"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_cell(path) -> tuple[ResultRecord, ExchangeTrace]:
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("record") != "result":
        raise ValueError(f"{path}: missing result record")
    return ResultRecord.from_json(lines[0]), ExchangeTrace.from_lines(lines[1:])


def run_cell(source, mechanism, m, n, shift, limit_ms, deterministic, out) -> ResultRecord:
    inst = generate_instance(list(_source_cities(source)), n, m, shift)
    d = distance_matrix(inst)
    outcome = run_mechanism(mechanism, inst, d, Budget(limit_ms, deterministic=deterministic))
    rec = ResultRecord(
        mechanism=mechanism,
        m=m,
        n=n,
        shift=shift,
        total=outcome.total,
        lengths=list(outcome.lengths),
        rounds=outcome.rounds,
        inferred_span=outcome.inferred_span,
        timed_out=outcome.timed_out,
        optimal=outcome.optimal,
    )
    lines = [json.dumps(rec.to_json())] + outcome.trace.to_lines()
    _write_atomic(cell_path(out, mechanism, m, n, shift), "\n".join(lines) + "\n")
    return rec


def _cell_job(args):
    try:
        return run_cell(*args), None
    except (OSError, ValueError, RuntimeError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def write_manifest(cfg: CampaignConfig) -> None:
    manifest = {
        "source": cfg.source or "CH130 (bundled)",
        "mechanisms": list(cfg.mechanisms),
        "m": list(cfg.m_values),
        "n": list(cfg.n_values),
        "shifts": list(cfg.shifts),
        "limit_ms": cfg.limit_ms,
        "deterministic_durations": cfg.deterministic,
        "endowment_rule": ENDOWMENT_RULE,
        "quantile_rule": QUANTILE_RULE,
    }
    _write_atomic(Path(cfg.out) / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    """Run every (mechanism, m, n, shift) cell not yet persisted under ``cfg.out``."""
    cfg.validate()
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    write_manifest(cfg)

    records: dict = {}
    todo = []
    for mech, m, n, s in cfg.cells():
        path = cell_path(cfg.out, mech, m, n, s)
        if path.exists():
            try:
                records[mech, m, n, s] = read_cell(path)[0]
                continue
            except (ValueError, KeyError, TypeError):
                log.warning("rerunning unreadable cell %s", path)
        todo.append((cfg.source, mech, m, n, s, cfg.limit_ms, cfg.deterministic, cfg.out))

    failed = []
    if cfg.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_cell_job, todo, chunksize=4))
    else:
        results = [_cell_job(args) for args in todo]
    for args, (rec, err) in zip(todo, results):
        if rec is not None:
            records[rec.key] = rec
        else:
            _, mech, m, n, s, *_ = args
            log.error("cell %s m=%d n=%d shift=%d failed: %s", mech, m, n, s, err)
            failed.append({"mechanism": mech, "m": m, "n": n, "shift": s, "error": err})
    if failed:
        _write_atomic(Path(cfg.out) / "failed.json", json.dumps(failed, indent=2) + "\n")

    ordered = [records[c] for c in cfg.cells() if c in records]
    return CampaignResult(ordered, executed=len(todo), failed=failed)


def load_records(out) -> list[ResultRecord]:
    root = Path(out) / "cells"
    records = [read_cell(p)[0] for p in sorted(root.glob("*/*/*.jsonl"))]
    return sorted(records, key=lambda r: (r.mechanism, r.m, r.n, r.shift))


# statistics


def quantile(values: Iterable[float], num: int, den: int) -> float:
    """Lower empirical quantile at p = num/den: ``sorted[ceil(p*len) - 1]``."""
    xs = sorted(values)
    if not xs:
        raise ValueError("quantile of an empty list")
    if not 0 <= num <= den:
        raise ValueError("quantile fraction must lie in [0, 1]")
    idx = max(0, -(-num * len(xs) // den) - 1)
    return xs[idx]


def decile(values: Iterable[float], k: int) -> float:
    if not 1 <= k <= 9:
        raise ValueError("decile index must be in 1..9")
    return quantile(values, k, 10)


@dataclass(frozen=True)
class BoxStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    whisker_low: float
    whisker_high: float


def boxplot(values: Iterable[float]) -> BoxStats:
    xs = sorted(values)
    if not xs:
        raise ValueError("boxplot of an empty list")
    q1, med, q3 = (quantile(xs, k, 4) for k in (1, 2, 3))
    reach = 1.5 * (q3 - q1)
    low = min(x for x in xs if x >= q1 - reach)
    high = max(x for x in xs if x <= q3 + reach)
    return BoxStats(xs[0], q1, med, q3, xs[-1], low, high)


@dataclass
class RatioTable:
    baseline: str
    entries: dict = field(default_factory=dict)  # (mechanism, m, n) -> [(shift, ratio)]
    gaps: list = field(default_factory=list)  # (mechanism, m, n, shift) without a baseline

    def values(self, mechanism: str, m: int, n: int) -> list[float]:
        return [r for _, r in self.entries.get((mechanism, m, n), [])]

    def summary(self) -> dict:
        return {
            key: {"median": decile([r for _, r in rows], 5), "decile9": decile([r for _, r in rows], 9)}
            for key, rows in sorted(self.entries.items())
            if rows
        }

    @property
    def mechanisms(self) -> list[str]:
        return sorted({k[0] for k in self.entries}, key=_mech_order)


def _mech_order(name: str):
    return (MECHANISMS.index(name) if name in MECHANISMS else len(MECHANISMS), name)


def ratios(records: Iterable[ResultRecord], baseline: str, mechanisms: Sequence[str] | None = None) -> RatioTable:
    """Per-instance ratio of each mechanism's total to the baseline's on the same (m, n, shift)."""
    records = list(records)
    base = {(r.m, r.n, r.shift): r.total for r in records if r.mechanism == baseline}
    table = RatioTable(baseline)
    for r in sorted(records, key=lambda r: (_mech_order(r.mechanism), r.m, r.n, r.shift)):
        if r.mechanism == baseline or (mechanisms is not None and r.mechanism not in mechanisms):
            continue
        b = base.get((r.m, r.n, r.shift))
        if b is None:
            table.gaps.append(r.key)
            continue
        ratio = r.total / b if b else (1.0 if r.total == 0 else float("inf"))
        table.entries.setdefault((r.mechanism, r.m, r.n), []).append((r.shift, ratio))
    return table


STATISTICS = {"median": 5, "decile9": 9}


def emit_report(table: RatioTable, out, mechanisms: Sequence[str] | None = None) -> list[Path]:
    """One CSV per (baseline, statistic, m) with columns n, mechanism, value, plus summary text."""
    chosen = table.mechanisms if mechanisms is None else [x for x in mechanisms if x != table.baseline]
    if not chosen:
        raise ValueError("no mechanisms selected for the report")
    keys = sorted(k for k in table.entries if k[0] in chosen and table.entries[k])
    if not keys:
        raise ValueError("ratio table has no entries for the selected mechanisms")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for m in sorted({k[1] for k in keys}):
        for stat, k in STATISTICS.items():
            path = out / f"ratio_{table.baseline}_{stat}_m{m}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "mechanism", "value"])
                for mech, mm, n in sorted((x for x in keys if x[1] == m), key=lambda x: (x[2], _mech_order(x[0]))):
                    w.writerow([n, mech, repr(decile(table.values(mech, mm, n), k))])
            written.append(path)

    path = out / f"summary_{table.baseline}.txt"
    lines = [f"# ratio of total length to {table.baseline}; {QUANTILE_RULE}"]
    lines.append(f"{'mechanism':<11} {'m':>2} {'n':>3} {'count':>5} {'median':>9} {'decile9':>9}")
    for mech, m, n in sorted(keys, key=lambda x: (x[1], _mech_order(x[0]), x[2])):
        vals = table.values(mech, m, n)
        lines.append(f"{mech:<11} {m:>2} {n:>3} {len(vals):>5} {decile(vals, 5):>9.4f} {decile(vals, 9):>9.4f}")
    if table.gaps:
        lines.append(f"# {len(table.gaps)} cells lack a baseline record and were skipped")
    path.write_text("\n".join(lines) + "\n")
    written.append(path)
    return written


def emit_span_report(records: Iterable[ResultRecord], out) -> Path:
    """Box-plot statistics of inferred spans per (m, n, mechanism)."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.m, r.n, r.mechanism), []).append(r.inferred_span)
    if not groups:
        raise ValueError("no records to summarise")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "spans.csv"
    fields = ["m", "n", "mechanism", *BoxStats.__dataclass_fields__]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for m, n, mech in sorted(groups, key=lambda k: (k[0], k[1], _mech_order(k[2]))):
            box = boxplot(groups[m, n, mech])
            w.writerow([m, n, mech, *(repr(v) for v in asdict(box).values())])
    return path
