"""``impactfd`` command line: sim, check, fig1, live, export."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import threading

from . import __version__
from .impact import FIG1_FAILURES, ImpactError, Status, fig1_set, fig1_table
from .props import CheckerConfig, Verdict, classify, replay_core
from .scenario import InvalidScenario, load_scenario
from .sim import run
from .trace import EventKind, MalformedTrace, ParseError, read_trace, serialize

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3

# (trust level, status) per row of the worked four-sensor example
FIG1_EXPECTED = {
    1: ("2.4", Status.TRUSTED),
    2: ("1.6", Status.NOT_TRUSTED),
    3: ("2", Status.TRUSTED),
    4: ("1.4", Status.NOT_TRUSTED),
    5: ("1.6", Status.NOT_TRUSTED),
}


class UsageError(Exception):
    pass


def _fmt_set(ids) -> str:
    return "{" + ", ".join(sorted(ids)) + "}"


def cmd_fig1(args) -> int:
    mset = fig1_set()
    print(f"S = {_fmt_set(mset.members)}; "
          + "; ".join(f"I_{q}={mset.members[q]}" for q in mset.ids))
    print(f"fault_margin = {mset.fault_margin}; sum(S) = {mset.total}; trust_limit = {mset.trust_limit}")
    print(f"{'t':>2}  {'F(t)':<12} {'trusted':<16} {'level':>5}  status")
    ok = True
    for snap in fig1_table():
        want_level, want_status = FIG1_EXPECTED[snap.at]
        match = str(snap.trust_level) == want_level and snap.status is want_status
        ok &= match
        print(f"{snap.at:>2}  {_fmt_set(FIG1_FAILURES[snap.at]):<12} {_fmt_set(snap.trusted):<16} "
              f"{str(snap.trust_level):>5}  {snap.status.label}{'' if match else '  MISMATCH'}")
    print("all rows match" if ok else "MISMATCH against expected table")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_sim(args) -> int:
    scenario = load_scenario(args.config)
    trace = run(scenario, args.seed)
    try:
        with open(args.out, "wb") as fh:
            fh.write(serialize(trace))
    except OSError as e:
        raise UsageError(f"cannot write {args.out}: {e.strerror}") from None
    samples = trace.samples()
    final = f"{samples[-1].status.value} level={samples[-1].level}" if samples else "no samples"
    crashes = sum(1 for ev in trace.events if ev.e is EventKind.CRASH)
    print(f"{scenario.name}: seed={args.seed} events={len(trace.events)} crashes={crashes} final={final} -> {args.out}")
    return EXIT_OK


def _read_trace(path):
    try:
        return read_trace(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def cmd_check(args) -> int:
    trace = _read_trace(args.trace)
    cfg = CheckerConfig.for_trace(trace, args.stab_window, args.min_post_crash)
    mismatches = replay_core(trace)
    report = classify(trace, cfg)
    print(f"{'property':<13} {'verdict':<13} {'witness':>8}  detail")
    for v in report.verdicts:
        witness = "-" if v.witness_time_ms is None else str(v.witness_time_ms)
        print(f"{v.property.value:<13} {v.verdict.value:<13} {witness:>8}  {v.detail}")
    for m in mismatches:
        print(f"replay mismatch at t={m.t}: {m.field} recorded {m.recorded}, expected {m.expected}")
    print(f"class: {report.aggregate}")
    if args.json:
        body = report.to_json()
        body["replay_mismatches"] = [m.__dict__ for m in mismatches]
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(body, fh, indent=2)
            fh.write("\n")
    if mismatches or any(v.verdict is Verdict.VIOLATED for v in report.verdicts):
        return EXIT_FAILED
    if any(v.verdict is Verdict.INCONCLUSIVE for v in report.verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_export(args) -> int:
    trace = _read_trace(args.trace)
    try:
        fh = open(args.csv, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise UsageError(f"cannot write {args.csv}: {e.strerror}") from None
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_ms", "trust_level", "status", "trusted_count"])
        for s in trace.samples():
            writer.writerow([s.t, str(s.level), s.status.value, len(s.trusted)])
    return EXIT_OK


def cmd_live(args) -> int:
    from .wire import load_live_config, run_sender, run_watcher

    config = load_live_config(args.config)
    stop = threading.Event()
    try:
        if args.role == "send":
            if not args.id:
                raise UsageError("live send needs --id")
            if args.id not in config.ids:
                raise UsageError(f"process {args.id!r} is not bound in {args.config}")
            run_sender(config, args.id, stop)
        else:
            run_watcher(config, stop)
    except KeyboardInterrupt:
        stop.set()
    except OSError as e:
        raise UsageError(f"socket error: {e}") from None
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="impactfd", description="Impact failure detector toolkit")
    p.add_argument("--version", action="version", version=f"impactfd {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sim", help="simulate a scenario and write a JSONL trace")
    s.add_argument("--config", required=True, help="scenario JSON file")
    s.add_argument("--seed", required=True, type=_u64, help="64-bit seed")
    s.add_argument("--out", required=True, help="trace output path")
    s.set_defaults(func=cmd_sim)

    c = sub.add_parser("check", help="check a trace for completeness, accuracy and set-sum accuracy")
    c.add_argument("--trace", required=True)
    c.add_argument("--stab-window", type=_positive, default=None, metavar="MS")
    c.add_argument("--min-post-crash", type=_positive, default=None, metavar="MS")
    c.add_argument("--json", default=None, metavar="FILE", help="also write the report as JSON")
    c.set_defaults(func=cmd_check)

    f = sub.add_parser("fig1", help="recompute the four-sensor example table")
    f.set_defaults(func=cmd_fig1)

    lv = sub.add_parser("live", help="run a UDP heartbeat sender or watcher")
    lv.add_argument("role", choices=["send", "watch"])
    lv.add_argument("--config", required=True)
    lv.add_argument("--id", default=None, help="process id to send as")
    lv.set_defaults(func=cmd_live)

    e = sub.add_parser("export", help="write trust level samples of a trace as CSV")
    e.add_argument("--trace", required=True)
    e.add_argument("--csv", required=True)
    e.set_defaults(func=cmd_export)
    return p


def _u64(text):
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        # --help and --version
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except (UsageError, InvalidScenario, ImpactError, ParseError, MalformedTrace) as e:
        print(f"impactfd: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"impactfd: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
