"""Heartbeat timeout estimator producing the currently trusted processes.

The estimator is a single-owner state machine: the caller feeds heartbeat
receptions and clock ticks in nondecreasing time order and gets back the
SUSPECT/TRUST transitions they cause.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .impact import MonitoredSet, TrustSnapshot, UnknownProcess, trust_level


class Strategy(str, enum.Enum):
    FIXED = "FIXED"
    ADAPTIVE = "ADAPTIVE"


class NonMonotoneTime(ValueError):
    def __init__(self, now, last):
        super().__init__(f"NonMonotoneTime: fed time {now} is earlier than {last}")


@dataclass(frozen=True)
class EstimatorConfig:
    strategy: Strategy = Strategy.FIXED
    timeout_ms: int = 1000
    increment_ms: int = 0
    safety_margin_ms: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        for name in ("timeout_ms", "increment_ms", "safety_margin_ms"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.increment_ms < 0 or self.safety_margin_ms < 0:
            raise ValueError("increment_ms and safety_margin_ms must be nonnegative")

    @classmethod
    def from_json(cls, obj: dict) -> EstimatorConfig:
        return cls(
            strategy=Strategy(obj.get("strategy", "FIXED")),
            timeout_ms=obj["timeout_ms"],
            increment_ms=obj.get("increment_ms", 0),
            safety_margin_ms=obj.get("safety_margin_ms", 0),
        )

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "timeout_ms": self.timeout_ms,
            "increment_ms": self.increment_ms,
            "safety_margin_ms": self.safety_margin_ms,
        }


class TransitionKind(str, enum.Enum):
    SUSPECT = "suspect"
    TRUST = "trust"


@dataclass(frozen=True)
class Transition:
    kind: TransitionKind
    q: str
    at: int


@dataclass
class ProcessState:
    last_heartbeat_at: int | None
    current_timeout_ms: int
    suspected: bool = False
    false_suspicions: int = 0
    last_seq: int | None = None


@dataclass
class Estimator:
    """Per-process timeout bookkeeping for one monitored set.

    Processes start trusted; a process that never sends is suspected once
    its first window, measured from the creation time, runs out.
    """

    mset: MonitoredSet
    config: EstimatorConfig
    init_time: int
    processes: dict[str, ProcessState] = field(init=False)
    now: int = field(init=False)

    def __post_init__(self):
        self.now = self.init_time
        self.processes = {
            q: ProcessState(last_heartbeat_at=None, current_timeout_ms=self.config.timeout_ms)
            for q in self.mset.ids
        }

    def _advance(self, now: int):
        if now < self.now:
            raise NonMonotoneTime(now, self.now)
        self.now = now

    def deadline(self, q: str) -> int:
        st = self.processes[q]
        start = self.init_time if st.last_heartbeat_at is None else st.last_heartbeat_at
        slack = self.config.safety_margin_ms if self.config.strategy is Strategy.ADAPTIVE else 0
        return start + st.current_timeout_ms + slack

    def on_heartbeat(self, q: str, recv_at: int, seq: int | None = None) -> list[Transition]:
        if q not in self.processes:
            raise UnknownProcess(q)
        self._advance(recv_at)
        st = self.processes[q]
        if seq is not None and (st.last_seq is None or seq > st.last_seq):
            st.last_seq = seq
        if st.last_heartbeat_at is None or recv_at > st.last_heartbeat_at:
            st.last_heartbeat_at = recv_at
        if not st.suspected:
            return []
        st.suspected = False
        st.false_suspicions += 1
        if self.config.strategy is Strategy.ADAPTIVE:
            st.current_timeout_ms += self.config.increment_ms
        return [Transition(TransitionKind.TRUST, q, recv_at)]

    def on_tick(self, now: int) -> list[Transition]:
        self._advance(now)
        out = []
        for q, st in self.processes.items():
            # strictly past the deadline
            if not st.suspected and now > self.deadline(q):
                st.suspected = True
                out.append(Transition(TransitionKind.SUSPECT, q, now))
        return out

    def trusted(self) -> frozenset[str]:
        return frozenset(q for q, st in self.processes.items() if not st.suspected)

    def snapshot(self, now: int | None = None) -> TrustSnapshot:
        return trust_level(self.mset, self.trusted(), self.now if now is None else now)

    def next_deadline(self) -> int | None:
        pending = [self.deadline(q) for q, st in self.processes.items() if not st.suspected]
        return min(pending) if pending else None


def new_estimator(mset: MonitoredSet, config: EstimatorConfig, now: int = 0) -> Estimator:
    return Estimator(mset, config, now)
