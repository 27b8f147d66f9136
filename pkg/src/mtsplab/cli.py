"""Command line: ``mtsplab {gen,run,ratios,report,spans}``.

Every flag can also be set through an ``MTSPLAB_<FLAG>`` environment
variable (e.g. ``MTSPLAB_LIMIT_MS=5000``); explicit flags win.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import harness
from .instances import generate_instance, load_ch130, load_tsplib
from .mechanisms import MECHANISMS
from .vclock import span_breakdown, write_breakdown_csv

EXIT_OK, EXIT_FAILED_CELL, EXIT_CONFIG = 0, 1, 2


def int_list(text: str) -> list[int]:
    """Parse ``"8..14"``, ``"2,3"`` or a mix like ``"0..9,20"``."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return out


def name_list(text: str) -> list[str]:
    names = [x.strip().lower() for x in str(text).split(",") if x.strip()]
    if names == ["all"]:
        return list(MECHANISMS)
    bad = [x for x in names if x not in MECHANISMS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown mechanisms {bad or text!r}; choose from {', '.join(MECHANISMS)}")
    return names


def limit(text: str) -> float | None:
    if str(text).lower() in ("none", "inf", "unbounded"):
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time limit {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("time limit must be positive")
    return value


def flag(text: str) -> bool:
    return str(text).lower() in ("1", "true", "yes", "on")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _env_default(parser, dest, default, conv=None):
    raw = os.environ.get(f"MTSPLAB_{dest.upper()}")
    if raw is None:
        return default
    try:
        return conv(raw) if conv else raw
    except (argparse.ArgumentTypeError, ValueError) as exc:
        parser.error(f"MTSPLAB_{dest.upper()}: {exc}")


def _add(parser, *names, dest, default=None, type=None, **kw):
    value = _env_default(parser, dest, default, type)
    parser.add_argument(*names, dest=dest, default=value, type=type, **kw)


def _add_switch(parser, name, dest, help):
    value = _env_default(parser, dest, False, flag)
    parser.add_argument(name, dest=dest, action="store_true", default=value, help=help)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mtsplab", description="Compare city-allocation mechanisms for selfish travelling salesmen.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="emit generated instances as JSON lines")
    _add(g, "--source", dest="source", help="TSPLIB file (default: bundled CH130)")
    _add(g, "--m", dest="m", type=int_list, default=list(harness.DEFAULT_M))
    _add(g, "--n", dest="n", type=int_list, default=list(harness.DEFAULT_N))
    _add(g, "--shifts", dest="shifts", type=int_list, default=[0])
    _add(g, "--out", dest="out", help="output file (default: stdout)")

    r = sub.add_parser("run", help="run a campaign")
    _add(r, "--source", dest="source", help="TSPLIB file (default: bundled CH130)")
    _add(r, "--mechanisms", dest="mechanisms", type=name_list, default=list(MECHANISMS))
    _add(r, "--m", dest="m", type=int_list, default=list(harness.DEFAULT_M))
    _add(r, "--n", dest="n", type=int_list, default=list(harness.DEFAULT_N))
    _add(r, "--shifts", dest="shifts", type=int_list, default=list(range(130)))
    _add(r, "--limit-ms", dest="limit_ms", type=limit, default=harness.DEFAULT_LIMIT_MS,
         help="per-run inferred time limit in ms, or 'none'")
    _add(r, "--out", dest="out", default="campaign")
    _add_switch(r, "--deterministic-durations", "deterministic_durations",
                "measure solver calls in counted work steps instead of wall time")
    _add(r, "--jobs", dest="jobs", type=int, default=1)

    q = sub.add_parser("ratios", help="print median and ninth-decile ratios against a baseline")
    _add(q, "--out", dest="out", default="campaign")
    _add(q, "--baseline", dest="baseline", default="optdecentr", choices=harness.BASELINES)
    _add(q, "--mechanisms", dest="mechanisms", type=name_list)

    t = sub.add_parser("report", help="write ratio and span CSVs for plotting")
    _add(t, "--out", dest="out", default="campaign")
    _add(t, "--report-dir", dest="report_dir", help="default: <out>/report")
    _add(t, "--mechanisms", dest="mechanisms", type=name_list)

    s = sub.add_parser("spans", help="per-call Gantt rows of one cell's trace as CSV")
    _add(s, "--out", dest="out", default="campaign")
    _add(s, "--mechanism", dest="mechanism", required=False, default="p2p", choices=MECHANISMS)
    _add(s, "--m", dest="m", type=int, default=harness.DEFAULT_M[0])
    _add(s, "--n", dest="n", type=int, default=harness.DEFAULT_N[0])
    _add(s, "--shift", dest="shift", type=int, default=0)
    _add(s, "--csv", dest="csv", help="output file (default: stdout)")
    return p


def cmd_gen(args) -> int:
    source = load_ch130() if args.source is None else load_tsplib(args.source)
    lines = []
    for m in args.m:
        for n in args.n:
            for shift in args.shifts:
                lines.append(generate_instance(source, n, m, shift).dumps())
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = harness.CampaignConfig(
        source=args.source,
        mechanisms=args.mechanisms,
        m_values=args.m,
        n_values=args.n,
        shifts=args.shifts,
        limit_ms=args.limit_ms,
        out=args.out,
        deterministic=args.deterministic_durations,
        jobs=args.jobs,
    )
    result = harness.run_campaign(cfg)
    print(f"{len(result)} records in {args.out} ({result.executed} cells run, {len(result.failed)} failed)")
    return EXIT_FAILED_CELL if result.failed else EXIT_OK


def cmd_ratios(args) -> int:
    table = harness.ratios(harness.load_records(args.out), args.baseline, args.mechanisms)
    summary = table.summary()
    if not summary:
        print(f"no ratios against {args.baseline} in {args.out}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{'mechanism':<11} {'m':>2} {'n':>3} {'median':>9} {'decile9':>9}")
    for (mech, m, n), row in sorted(summary.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[0][2])):
        print(f"{mech:<11} {m:>2} {n:>3} {row['median']:>9.4f} {row['decile9']:>9.4f}")
    if table.gaps:
        print(f"{len(table.gaps)} cells lack a baseline record", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    records = harness.load_records(args.out)
    if not records:
        print(f"no records in {args.out}", file=sys.stderr)
        return EXIT_CONFIG
    dest = Path(args.report_dir or Path(args.out) / "report")
    written = []
    present = {r.mechanism for r in records}
    for baseline in harness.BASELINES:
        if baseline not in present:
            continue
        table = harness.ratios(records, baseline, args.mechanisms)
        if table.entries:
            written += harness.emit_report(table, dest, args.mechanisms)
    written.append(harness.emit_span_report(records, dest))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_spans(args) -> int:
    path = harness.cell_path(args.out, args.mechanism, args.m, args.n, args.shift)
    if not path.exists():
        print(f"no such cell: {path}", file=sys.stderr)
        return EXIT_CONFIG
    _, trace = harness.read_cell(path)
    rows = span_breakdown(trace)
    write_breakdown_csv(rows, args.csv or sys.stdout)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "ratios": cmd_ratios, "report": cmd_report, "spans": cmd_spans}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (harness.ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"mtsplab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
