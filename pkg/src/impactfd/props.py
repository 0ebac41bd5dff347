"""Finite-trace checks for completeness, accuracy and set-sum accuracy.

Each property has the shape "there is a time after which ...". On a finite
trace that is judged over SAMPLE events: the condition must hold from some
witness time to the end of the trace, and the trailing stretch has to be
long enough before it counts as HOLDS. Too short a stretch is INCONCLUSIVE,
never a guess.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .impact import MonitoredSet, UnknownProcess, status_of, sum_impacts
from .trace import EventKind, MalformedTrace, Trace, failure_pattern

DEFAULT_STAB_WINDOW_MS = 10_000
DEFAULT_MIN_POST_CRASH_MS = 10_000

CONSISTENT = "eventually-perfect-impact-consistent"
INCONSISTENT = "inconsistent"
INCONCLUSIVE_CLASS = "inconclusive"


class Property(str, enum.Enum):
    COMPLETENESS = "COMPLETENESS"
    ACCURACY = "ACCURACY"
    SET_SUM = "SET_SUM"


class Verdict(str, enum.Enum):
    HOLDS = "HOLDS"
    VIOLATED = "VIOLATED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class CheckerConfig:
    stab_window_ms: int = DEFAULT_STAB_WINDOW_MS
    min_post_crash_ms: int = DEFAULT_MIN_POST_CRASH_MS

    def __post_init__(self):
        if self.stab_window_ms <= 0 or self.min_post_crash_ms <= 0:
            raise ValueError("stab_window_ms and min_post_crash_ms must be positive")

    @classmethod
    def for_trace(cls, trace: Trace, stab_window_ms=None, min_post_crash_ms=None) -> CheckerConfig:
        if min_post_crash_ms is None:
            period = trace.heartbeat_period()
            min_post_crash_ms = 10 * period if period else DEFAULT_MIN_POST_CRASH_MS
        return cls(stab_window_ms or DEFAULT_STAB_WINDOW_MS, min_post_crash_ms)


@dataclass(frozen=True)
class PropVerdict:
    property: Property
    verdict: Verdict
    witness_time_ms: int | None
    detail: str = ""

    def __post_init__(self):
        if (self.verdict is Verdict.INCONCLUSIVE) != (self.witness_time_ms is None):
            raise ValueError("HOLDS/VIOLATED carry a witness time, INCONCLUSIVE does not")

    def to_json(self) -> dict:
        return {
            "property": self.property.value,
            "verdict": self.verdict.value,
            "witness_time_ms": self.witness_time_ms,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ClassReport:
    completeness: PropVerdict
    accuracy: PropVerdict
    set_sum: PropVerdict
    latencies: dict[str, int] = field(default_factory=dict)

    @property
    def verdicts(self) -> tuple[PropVerdict, ...]:
        return (self.completeness, self.accuracy, self.set_sum)

    @property
    def aggregate(self) -> str:
        kinds = {v.verdict for v in self.verdicts}
        if kinds == {Verdict.HOLDS}:
            return CONSISTENT
        if Verdict.VIOLATED in kinds:
            return INCONSISTENT
        return INCONCLUSIVE_CLASS

    def to_json(self) -> dict:
        return {
            "verdicts": [v.to_json() for v in self.verdicts],
            "latencies_ms": dict(sorted(self.latencies.items())),
            "class": self.aggregate,
        }


def _require_set(trace: Trace, mset: MonitoredSet | None) -> MonitoredSet:
    mset = mset if mset is not None else trace.monitored_set()
    if mset is None:
        raise MalformedTrace("trace header carries no monitored set; pass one explicitly")
    return mset


def _transitions(trace: Trace, kind: EventKind, q: str) -> list[int]:
    return [ev.t for ev in trace.events if ev.e is kind and ev.q == q]


def completeness_witnesses(trace: Trace, mset: MonitoredSet | None = None) -> dict[str, int | None]:
    """Per crashed process, the time from which it is never trusted again.

    ``None`` means the process still shows up in the last SAMPLE.
    """
    fp = failure_pattern(trace, mset)
    samples = trace.samples()
    out = {}
    for q, crash_t in fp.crash_times.items():
        last_in = max((s.t for s in samples if q in s.trusted), default=None)
        after = [s.t for s in samples if last_in is None or s.t > last_in]
        if last_in is not None and not after:
            out[q] = None
            continue
        first_out = after[0] if after else crash_t
        suspects = [t for t in _transitions(trace, EventKind.SUSPECT, q) if last_in is None or t > last_in]
        trusts = _transitions(trace, EventKind.TRUST, q)
        t_star = first_out
        if suspects and not any(t > suspects[-1] for t in trusts):
            t_star = min(suspects[-1], first_out)
        out[q] = max(t_star, crash_t)
    return out


def check_completeness(trace: Trace, cfg: CheckerConfig, mset: MonitoredSet | None = None) -> PropVerdict:
    fp = failure_pattern(trace, mset)
    prop = Property.COMPLETENESS
    if not fp.crash_times:
        return PropVerdict(prop, Verdict.HOLDS, 0, "no crashes")
    witnesses = completeness_witnesses(trace, mset)
    last_crash = max(fp.crash_times.values())
    pending = sorted(q for q, w in witnesses.items() if w is None)
    if pending:
        return PropVerdict(prop, Verdict.INCONCLUSIVE, None, f"still trusted at end of trace: {', '.join(pending)}")
    extent = trace.end_time - last_crash
    latencies = ", ".join(f"{q}={witnesses[q] - fp.crash_times[q]}ms" for q in sorted(witnesses))
    if extent < cfg.min_post_crash_ms:
        return PropVerdict(
            prop, Verdict.INCONCLUSIVE, None,
            f"trace ends {extent}ms after last crash, need {cfg.min_post_crash_ms}ms; latencies {latencies}",
        )
    return PropVerdict(prop, Verdict.HOLDS, max(witnesses.values()), f"latencies {latencies}")


def _suffix_verdict(prop, trace, cfg, good, refine) -> PropVerdict:
    samples = trace.samples()
    if not samples:
        return PropVerdict(prop, Verdict.INCONCLUSIVE, None, "trace has no samples")
    bad = [i for i, s in enumerate(samples) if not good(s)]
    if not bad:
        witness = 0
    elif bad[-1] == len(samples) - 1:
        return PropVerdict(prop, Verdict.VIOLATED, samples[-1].t, f"final sample at t={samples[-1].t} fails")
    else:
        b, g = samples[bad[-1]], samples[bad[-1] + 1]
        witness = refine(b, g)
    span = trace.end_time - witness
    if span >= cfg.stab_window_ms:
        return PropVerdict(prop, Verdict.HOLDS, witness, f"stable for {span}ms")
    return PropVerdict(
        prop, Verdict.INCONCLUSIVE, None,
        f"stable only for the last {span}ms from t={witness}, need {cfg.stab_window_ms}ms",
    )


def check_accuracy(trace: Trace, cfg: CheckerConfig, mset: MonitoredSet | None = None) -> PropVerdict:
    fp = failure_pattern(trace, _require_set(trace, mset))
    correct = fp.correct

    def good(s):
        return correct <= set(s.trusted)

    def refine(b, g):
        # when the processes missing at the last bad sample were trusted again
        times = []
        for q in correct - set(b.trusted):
            trusts = [t for t in _transitions(trace, EventKind.TRUST, q) if b.t < t <= g.t]
            if not trusts:
                return g.t
            times.append(trusts[0])
        return max(times)

    return _suffix_verdict(Property.ACCURACY, trace, cfg, good, refine)


def check_set_sum(trace: Trace, cfg: CheckerConfig, mset: MonitoredSet | None = None) -> PropVerdict:
    mset = _require_set(trace, mset)
    fp = failure_pattern(trace, mset)
    target = sum_impacts(mset, fp.correct)

    def good(s):
        return s.level == target

    def refine(b, g):
        # the trusted set last changed at the latest transition in (b, g]
        moves = [ev.t for ev in trace.events
                 if ev.e in (EventKind.SUSPECT, EventKind.TRUST) and b.t < ev.t <= g.t]
        return moves[-1] if moves else g.t

    verdict = _suffix_verdict(Property.SET_SUM, trace, cfg, good, refine)
    return PropVerdict(verdict.property, verdict.verdict, verdict.witness_time_ms,
                       f"target {target}; {verdict.detail}")


def classify(trace: Trace, cfg: CheckerConfig, mset: MonitoredSet | None = None) -> ClassReport:
    mset = _require_set(trace, mset)
    fp = failure_pattern(trace, mset)
    latencies = {
        q: w - fp.crash_times[q]
        for q, w in completeness_witnesses(trace, mset).items() if w is not None
    }
    return ClassReport(
        check_completeness(trace, cfg, mset),
        check_accuracy(trace, cfg, mset),
        check_set_sum(trace, cfg, mset),
        latencies,
    )


@dataclass(frozen=True)
class Mismatch:
    t: int
    field: str
    recorded: str
    expected: str


def replay_core(trace: Trace, mset: MonitoredSet | None = None) -> list[Mismatch]:
    """Recompute level and status of every SAMPLE from its trusted set."""
    mset = _require_set(trace, mset)
    out = []
    for s in trace.samples():
        try:
            level = sum_impacts(mset, s.trusted)
        except UnknownProcess as e:
            out.append(Mismatch(s.t, "trusted", ",".join(s.trusted), f"members only ({e.process!r} unknown)"))
            continue
        if level != s.level:
            out.append(Mismatch(s.t, "level", str(s.level), str(level)))
        status = status_of(mset, level)
        if status is not s.status:
            out.append(Mismatch(s.t, "status", s.status.value, status.value))
    return out
