"""Deterministic discrete-event run of one monitor watching its set over a lossy network."""

from __future__ import annotations

import heapq

from . import __version__
from .liveness import TransitionKind, new_estimator
from .rng import SplitMix64
from .scenario import Scenario
from .trace import Event, EventKind, Trace, TraceHeader, sample_event

# processing phases within one instant
_CRASH, _SEND, _RECV, _WAKE, _SAMPLE = range(5)

_TRANSITION_EVENT = {TransitionKind.SUSPECT: EventKind.SUSPECT, TransitionKind.TRUST: EventKind.TRUST}


def run(scenario: Scenario, seed: int) -> Trace:
    """Simulate ``scenario`` and return the full event trace.

    Each process sends a heartbeat every period from t=0 until it crashes
    (a crash at t suppresses the send due at t). Before GST a send is lost
    with ``loss_prob``; otherwise it arrives after a uniform integer delay.
    The estimator is evaluated at every event instant and one millisecond
    after its earliest pending deadline, and sampled every
    ``sample_period_ms``. All randomness comes from SplitMix64(seed), drawn
    in event-processing order: one loss draw per pre-GST send, then one
    delay draw per delivered send.
    """
    rng = SplitMix64(seed)
    mset = scenario.set
    net = scenario.network
    period = scenario.heartbeat_period_ms
    horizon = scenario.duration_ms
    est = new_estimator(mset, scenario.estimator, 0)

    heap: list[tuple[int, int, str, int]] = []
    for q in mset.ids:
        heap.append((0, _SEND, q, 0))
    for q, at in scenario.crashes:
        heap.append((at, _CRASH, q, 0))
    heap.append((0, _SAMPLE, "", 0))
    heapq.heapify(heap)

    alive = set(mset.ids)
    wakes: set[int] = set()
    out: list[Event] = []

    def emit_transitions(transitions):
        for tr in transitions:
            out.append(Event(tr.at, _TRANSITION_EVENT[tr.kind], q=tr.q))

    while heap and heap[0][0] <= horizon:
        now = heap[0][0]
        while heap and heap[0][0] == now and heap[0][1] < _SAMPLE:
            _, phase, q, seq = heapq.heappop(heap)
            if phase == _CRASH:
                alive.discard(q)
                out.append(Event(now, EventKind.CRASH, q=q))
            elif phase == _SEND:
                if q not in alive:
                    continue
                out.append(Event(now, EventKind.HB_SEND, q=q, seq=seq))
                heapq.heappush(heap, (now + period, _SEND, q, seq + 1))
                if net.after_gst(now):
                    hi = net.post_gst_delay_ms
                else:
                    if net.loss_prob and rng.bernoulli(net.loss_prob):
                        out.append(Event(now, EventKind.DROP, q=q, seq=seq))
                        continue
                    hi = net.max_delay_ms
                delay = rng.randint(net.min_delay_ms, hi)
                heapq.heappush(heap, (now + delay, _RECV, q, seq))
            elif phase == _RECV:
                out.append(Event(now, EventKind.HB_RECV, q=q, seq=seq))
                emit_transitions(est.on_heartbeat(q, now, seq))
            else:
                wakes.discard(now)

        emit_transitions(est.on_tick(now))

        if heap and heap[0][:2] == (now, _SAMPLE):
            heapq.heappop(heap)
            snap = est.snapshot(now)
            out.append(sample_event(now, snap.trusted, snap.trust_level, snap.status))
            heapq.heappush(heap, (now + scenario.sample_period_ms, _SAMPLE, "", 0))

        deadline = est.next_deadline()
        if deadline is not None:
            # suspicion needs now > deadline; integer clock
            wake = max(deadline + 1, now + 1)
            if wake not in wakes:
                wakes.add(wake)
                heapq.heappush(heap, (wake, _WAKE, "", 0))

    out.sort(key=Event.sort_key)
    header = TraceHeader(scenario.digest(), seed, __version__, scenario.to_json())
    return Trace(header, out)
