"""Trace events, the JSON Lines trace file, and the failure pattern of a run."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .impact import BadDecimal, ImpactError, ImpactValue, MonitoredSet, Status, validate_set


class EventKind(str, enum.Enum):
    CRASH = "crash"
    HB_SEND = "hb_send"
    DROP = "drop"
    HB_RECV = "hb_recv"
    SUSPECT = "suspect"
    TRUST = "trust"
    SAMPLE = "sample"


# tie-break order for events sharing a timestamp
KIND_RANK = {kind: i for i, kind in enumerate(EventKind)}
_WITH_SEQ = {EventKind.HB_SEND, EventKind.DROP, EventKind.HB_RECV}


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"ParseError: line {line}: {reason}")
        self.line = line
        self.reason = reason


class MalformedTrace(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    t: int
    e: EventKind
    q: str | None = None
    seq: int | None = None
    trusted: tuple[str, ...] | None = None
    level: ImpactValue | None = None
    status: Status | None = None

    def sort_key(self):
        return (self.t, KIND_RANK[self.e], self.q or "", -1 if self.seq is None else self.seq)

    def to_json(self) -> dict:
        obj = {"t": self.t, "e": self.e.value}
        if self.e is EventKind.SAMPLE:
            obj["trusted"] = list(self.trusted)
            obj["level"] = str(self.level)
            obj["status"] = self.status.value
            return obj
        obj["q"] = self.q
        if self.e in _WITH_SEQ:
            obj["seq"] = self.seq
        return obj


def sample_event(t: int, trusted, level: ImpactValue, status: Status) -> Event:
    return Event(t, EventKind.SAMPLE, trusted=tuple(sorted(trusted)), level=level, status=status)


@dataclass(frozen=True)
class TraceHeader:
    scenario: str
    seed: int
    version: str
    # scenario file contents, so a trace can be checked on its own
    config: dict | None = None

    def to_json(self) -> dict:
        obj = {"scenario": self.scenario, "seed": self.seed, "version": self.version}
        if self.config is not None:
            obj["config"] = self.config
        return obj


@dataclass
class Trace:
    header: TraceHeader
    events: list[Event] = field(default_factory=list)

    @property
    def end_time(self) -> int:
        return self.events[-1].t if self.events else 0

    def samples(self) -> list[Event]:
        return [ev for ev in self.events if ev.e is EventKind.SAMPLE]

    def monitored_set(self) -> MonitoredSet | None:
        cfg = self.header.config
        if not cfg or "set" not in cfg:
            return None
        s = cfg["set"]
        try:
            return validate_set(s["members"], s["fault_margin"], s.get("monitor", "p"))
        except (KeyError, TypeError, ImpactError) as e:
            raise MalformedTrace(f"header config has an invalid set: {e}") from None

    def heartbeat_period(self) -> int | None:
        cfg = self.header.config or {}
        period = cfg.get("heartbeat_period_ms")
        return period if isinstance(period, int) and period > 0 else None


def serialize(trace: Trace) -> bytes:
    lines = [json.dumps(trace.header.to_json(), separators=(",", ":"), sort_keys=False)]
    lines.extend(json.dumps(ev.to_json(), separators=(",", ":")) for ev in trace.events)
    return ("\n".join(lines) + "\n").encode("utf-8")


def _u64(obj, key, lineno):
    value = obj.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < 1 << 64:
        raise ParseError(lineno, f"{key!r} must be an unsigned 64-bit integer")
    return value


def _parse_event(obj, lineno) -> Event:
    if not isinstance(obj, dict):
        raise ParseError(lineno, "record is not an object")
    t = _u64(obj, "t", lineno)
    try:
        kind = EventKind(obj.get("e"))
    except ValueError:
        raise ParseError(lineno, f"unknown event type {obj.get('e')!r}") from None
    if kind is EventKind.SAMPLE:
        trusted = obj.get("trusted")
        if not isinstance(trusted, list) or not all(isinstance(q, str) for q in trusted):
            raise ParseError(lineno, "'trusted' must be a list of process ids")
        try:
            level = ImpactValue.parse(obj.get("level"))
        except BadDecimal:
            raise ParseError(lineno, f"bad level {obj.get('level')!r}") from None
        try:
            status = Status(obj.get("status"))
        except ValueError:
            raise ParseError(lineno, f"bad status {obj.get('status')!r}") from None
        return Event(t, kind, trusted=tuple(trusted), level=level, status=status)
    q = obj.get("q")
    if not isinstance(q, str) or not q:
        raise ParseError(lineno, "'q' must be a non-empty string")
    seq = _u64(obj, "seq", lineno) if kind in _WITH_SEQ else None
    return Event(t, kind, q=q, seq=seq)


def deserialize(data: bytes | str) -> Trace:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "missing header line")
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append((i, json.loads(line)))
        except json.JSONDecodeError as e:
            raise ParseError(i, f"invalid JSON: {e.msg}") from None
    if not records:
        raise ParseError(1, "missing header line")
    lineno, head = records[0]
    if not isinstance(head, dict) or "e" in head:
        raise ParseError(lineno, "first line must be the header object")
    if not isinstance(head.get("scenario"), str) or not isinstance(head.get("version"), str):
        raise ParseError(lineno, "header needs string 'scenario' and 'version'")
    config = head.get("config")
    if config is not None and not isinstance(config, dict):
        raise ParseError(lineno, "header 'config' must be an object")
    header = TraceHeader(head["scenario"], _u64(head, "seed", lineno), head["version"], config)
    return Trace(header, [_parse_event(obj, n) for n, obj in records[1:]])


def read_trace(path) -> Trace:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def write_trace(trace: Trace, path):
    with open(path, "wb") as fh:
        fh.write(serialize(trace))


def check_well_formed(trace: Trace):
    last = None
    crashed = set()
    for ev in trace.events:
        if last is not None and ev.t < last:
            raise MalformedTrace(f"event at t={ev.t} follows t={last}; events must be time-ordered")
        last = ev.t
        if ev.e is EventKind.CRASH:
            if ev.q in crashed:
                raise MalformedTrace(f"process {ev.q!r} crashes twice")
            crashed.add(ev.q)


@dataclass(frozen=True)
class FailurePattern:
    """Crash times observed in a trace, read as F(t) over the trace horizon."""

    crash_times: dict[str, int]
    processes: frozenset[str]

    def at(self, t: int) -> frozenset[str]:
        # inclusive: a crash at t belongs to F(t)
        return frozenset(q for q, c in self.crash_times.items() if c <= t)

    @property
    def faulty(self) -> frozenset[str]:
        return frozenset(self.crash_times)

    @property
    def correct(self) -> frozenset[str]:
        return self.processes - self.faulty


def failure_pattern(trace: Trace, mset: MonitoredSet | None = None) -> FailurePattern:
    check_well_formed(trace)
    if mset is None:
        mset = trace.monitored_set()
    crash_times = {ev.q: ev.t for ev in trace.events if ev.e is EventKind.CRASH}
    if mset is not None:
        processes = frozenset(mset.members)
        unknown = set(crash_times) - processes
        if unknown:
            raise MalformedTrace(f"crash of processes outside the monitored set: {sorted(unknown)}")
    else:
        processes = frozenset(ev.q for ev in trace.events if ev.q is not None)
        processes |= frozenset(q for ev in trace.samples() for q in ev.trusted)
    return FailurePattern(crash_times, processes)
