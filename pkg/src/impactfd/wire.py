"""Live mode: 28-byte UDP heartbeats and a watcher driving the timeout estimator."""

from __future__ import annotations

import json
import logging
import select
import socket
import struct
import sys
import threading
import time
from dataclasses import dataclass, field

from .impact import MonitoredSet, validate_set
from .liveness import Estimator, EstimatorConfig, new_estimator
from .scenario import InvalidScenario, members_from_json, load_json
from .trace import sample_event

log = logging.getLogger(__name__)

MAGIC = b"IFD1"
_LAYOUT = struct.Struct(">4sQQQ")
MSG_SIZE = _LAYOUT.size  # 28


class WireError(ValueError):
    pass


class BadMagic(WireError):
    pass


class BadLength(WireError):
    pass


@dataclass(frozen=True)
class HeartbeatMsg:
    sender_numeric_id: int
    seq: int
    send_ts_ms: int


def encode(msg: HeartbeatMsg) -> bytes:
    return _LAYOUT.pack(MAGIC, msg.sender_numeric_id, msg.seq, msg.send_ts_ms)


def decode(data: bytes) -> HeartbeatMsg:
    if len(data) != MSG_SIZE:
        raise BadLength(f"BadLength: heartbeat must be {MSG_SIZE} bytes, got {len(data)}")
    magic, sender, seq, ts = _LAYOUT.unpack(data)
    if magic != MAGIC:
        raise BadMagic(f"BadMagic: {magic!r}")
    return HeartbeatMsg(sender, seq, ts)


@dataclass(frozen=True)
class LiveConfig:
    set: MonitoredSet
    ids: dict[str, int]
    host: str
    port: int
    heartbeat_period_ms: int
    estimator: EstimatorConfig
    report_period_ms: int

    def __post_init__(self):
        if set(self.ids) != set(self.set.members):
            raise InvalidScenario("ids must bind every member of the set exactly once")
        if len(set(self.ids.values())) != len(self.ids):
            raise InvalidScenario("numeric ids must be unique")
        if any(not 0 <= n < 1 << 64 for n in self.ids.values()):
            raise InvalidScenario("numeric ids must be unsigned 64-bit integers")
        if self.heartbeat_period_ms <= 0 or self.report_period_ms <= 0:
            raise InvalidScenario("heartbeat_period_ms and report_period_ms must be positive")

    @property
    def by_numeric_id(self) -> dict[int, str]:
        return {n: q for q, n in self.ids.items()}

    @classmethod
    def from_json(cls, obj: dict) -> LiveConfig:
        try:
            s = obj["set"]
            try:
                estimator = EstimatorConfig.from_json(obj["estimator"])
            except ValueError as e:
                raise InvalidScenario(f"estimator: {e}") from None
            listen = obj.get("listen", {})
            return cls(
                set=validate_set(members_from_json(s["members"]), s["fault_margin"], s.get("monitor", "p")),
                ids={q: int(n) for q, n in obj["ids"].items()},
                host=listen.get("host", "127.0.0.1"),
                port=int(listen.get("port", 0)),
                heartbeat_period_ms=int(obj["heartbeat_period_ms"]),
                estimator=estimator,
                report_period_ms=int(obj.get("report_period_ms", 1000)),
            )
        except KeyError as e:
            raise InvalidScenario(f"missing field {e.args[0]!r}") from None
        except (TypeError, AttributeError) as e:
            raise InvalidScenario(str(e)) from None


def load_live_config(path) -> LiveConfig:
    with open(path, encoding="utf-8") as fh:
        obj = load_json(fh.read())
    if not isinstance(obj, dict):
        raise InvalidScenario("live config must hold a JSON object")
    return LiveConfig.from_json(obj)


class MonotoneClock:
    """Milliseconds since construction, from the monotonic clock."""

    def __init__(self):
        self._start = time.monotonic_ns()

    def __call__(self) -> int:
        return (time.monotonic_ns() - self._start) // 1_000_000


def run_sender(config: LiveConfig, process: str, stop: threading.Event | None = None,
               target: tuple[str, int] | None = None, on_send=None) -> int:
    """Send a heartbeat every period until ``stop`` is set; return how many were sent.

    The first heartbeat goes out immediately. Sends are scheduled on a fixed
    grid so sleep jitter does not accumulate.
    """
    if process not in config.ids:
        raise InvalidScenario(f"process {process!r} is not bound in the live config")
    stop = stop or threading.Event()
    numeric_id = config.ids[process]
    addr = target or (config.host, config.port)
    period = config.heartbeat_period_ms / 1000
    seq = 0
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        start = time.monotonic()
        while True:
            sock.sendto(encode(HeartbeatMsg(numeric_id, seq, int(time.time() * 1000))), addr)
            if on_send is not None:
                on_send(seq)
            seq += 1
            if stop.wait(max(0.0, start + seq * period - time.monotonic())):
                return seq


@dataclass
class WatcherStats:
    received: int = 0
    unknown_sender: int = 0
    malformed: int = 0


@dataclass
class Watcher:
    """Estimator owner for live mode.

    ``handle_datagram`` and ``poll`` take the receive time explicitly, so the
    state machine can be driven without a socket; ``serve`` wires them to a
    UDP socket and the monotone clock.
    """

    config: LiveConfig
    clock: MonotoneClock = field(default_factory=MonotoneClock)
    out: object = None
    estimator: Estimator = field(init=False)
    stats: WatcherStats = field(default_factory=WatcherStats)
    reports: list = field(default_factory=list)
    _next_report: int = field(init=False, default=0)

    def __post_init__(self):
        self.estimator = new_estimator(self.config.set, self.config.estimator, self.clock())
        self._next_report = self.estimator.now
        self._lookup = self.config.by_numeric_id

    def handle_datagram(self, data: bytes, now: int):
        try:
            msg = decode(data)
        except WireError as e:
            self.stats.malformed += 1
            log.warning("dropping malformed datagram: %s", e)
            return
        q = self._lookup.get(msg.sender_numeric_id)
        if q is None:
            self.stats.unknown_sender += 1
            log.warning("dropping heartbeat from unknown sender id %d", msg.sender_numeric_id)
            return
        self.stats.received += 1
        # send_ts_ms is deliberately ignored
        self.estimator.on_heartbeat(q, now, msg.seq)
        self.estimator.on_tick(now)

    def poll(self, now: int):
        """Evaluate deadlines and emit any report that is due at ``now``."""
        self.estimator.on_tick(now)
        if now >= self._next_report:
            snap = self.estimator.snapshot(now)
            record = sample_event(now, snap.trusted, snap.trust_level, snap.status).to_json()
            self.reports.append(record)
            if self.out is not None:
                self.out.write(json.dumps(record, separators=(",", ":")) + "\n")
                self.out.flush()
            period = self.config.report_period_ms
            self._next_report += period * ((now - self._next_report) // period + 1)

    def next_wakeup(self) -> int:
        deadline = self.estimator.next_deadline()
        if deadline is None:
            return self._next_report
        return min(self._next_report, deadline + 1)

    def serve(self, stop: threading.Event | None = None, sock: socket.socket | None = None,
              ready: threading.Event | None = None):
        stop = stop or threading.Event()
        own = sock is None
        if own:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.bind((self.config.host, self.config.port))
        self.address = sock.getsockname()
        if ready is not None:
            ready.set()
        try:
            while not stop.is_set():
                wait_ms = max(0, self.next_wakeup() - self.clock())
                readable, _, _ = select.select([sock], [], [], min(wait_ms, 50) / 1000)
                if readable:
                    data, _ = sock.recvfrom(2048)
                    self.handle_datagram(data, self.clock())
                self.poll(self.clock())
        finally:
            if own:
                sock.close()


def run_watcher(config: LiveConfig, stop: threading.Event | None = None, out=None) -> Watcher:
    watcher = Watcher(config, out=out if out is not None else sys.stdout)
    watcher.serve(stop)
    return watcher
