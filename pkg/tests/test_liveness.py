import math

import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, rule

from impactfd.impact import Status, UnknownProcess, fig1_set, validate_set
from impactfd.liveness import (
    EstimatorConfig,
    NonMonotoneTime,
    Strategy,
    Transition,
    TransitionKind,
    new_estimator,
)

SUSPECT, TRUST = TransitionKind.SUSPECT, TransitionKind.TRUST


def single(timeout=100, strategy=Strategy.FIXED, increment=0, margin=0):
    mset = validate_set({"q": "1"}, "1", "p")
    return new_estimator(mset, EstimatorConfig(strategy, timeout, increment, margin), 0)


def test_config_rejects_zero_timeout():
    with pytest.raises(ValueError):
        EstimatorConfig(Strategy.FIXED, 0)


def test_initially_all_trusted(fig1):
    est = new_estimator(fig1, EstimatorConfig(Strategy.FIXED, 1500), 0)
    assert est.trusted() == frozenset(fig1.members)
    assert {est.deadline(q) for q in fig1.members} == {1500}
    snap = est.snapshot(0)
    assert str(snap.trust_level) == "2.6"
    assert snap.status is Status.TRUSTED


def test_first_window_starts_at_creation():
    mset = validate_set({"q": "1"}, "1", "p")
    est = new_estimator(mset, EstimatorConfig(Strategy.FIXED, 100), 250)
    assert est.next_deadline() == 350
    assert est.on_tick(350) == []
    assert est.on_tick(351) == [Transition(SUSPECT, "q", 351)]


def test_strict_deadline():
    est = single(100)
    est.on_heartbeat("q", 0)
    assert est.on_tick(100) == []
    assert est.on_tick(101) == [Transition(SUSPECT, "q", 101)]
    assert est.on_tick(500) == []


def test_trust_after_false_suspicion_adaptive():
    est = single(1000, Strategy.ADAPTIVE, increment=250)
    est.on_heartbeat("q", 900)
    assert est.on_tick(2000) == [Transition(SUSPECT, "q", 2000)]
    assert est.on_heartbeat("q", 2100) == [Transition(TRUST, "q", 2100)]
    st_ = est.processes["q"]
    assert st_.current_timeout_ms == 1250
    assert st_.false_suspicions == 1
    assert est.next_deadline() == 3350


def test_fixed_does_not_grow():
    est = single(100, Strategy.FIXED, increment=50)
    est.on_tick(101)
    est.on_heartbeat("q", 102)
    assert est.processes["q"].current_timeout_ms == 100


def test_safety_margin_extends_adaptive_deadline():
    est = single(100, Strategy.ADAPTIVE, increment=10, margin=30)
    est.on_heartbeat("q", 0)
    assert est.next_deadline() == 130
    assert est.on_tick(130) == []


def test_heartbeat_while_trusted_extends_deadline():
    est = single(100)
    est.on_heartbeat("q", 0)
    assert est.on_heartbeat("q", 80) == []
    assert est.next_deadline() == 180


def test_unknown_and_nonmonotone():
    est = single(100)
    with pytest.raises(UnknownProcess):
        est.on_heartbeat("nope", 0)
    est.on_tick(50)
    with pytest.raises(NonMonotoneTime):
        est.on_heartbeat("q", 40)
    with pytest.raises(NonMonotoneTime):
        est.on_tick(49)


def test_stale_seq_does_not_move_backwards():
    est = single(100)
    est.on_heartbeat("q", 10, seq=5)
    est.on_heartbeat("q", 10, seq=3)
    assert est.processes["q"].last_seq == 5
    assert est.processes["q"].last_heartbeat_at == 10


def test_next_deadline_min_and_none():
    mset = validate_set({"a": "1", "b": "1", "c": "1"}, "1", "p")
    est = new_estimator(mset, EstimatorConfig(Strategy.FIXED, 100), 0)
    est.on_heartbeat("a", 1400)
    est.on_heartbeat("b", 1400)
    est.on_heartbeat("c", 1400)
    est.processes["a"].current_timeout_ms = 100
    est.processes["b"].current_timeout_ms = 600
    est.processes["c"].current_timeout_ms = 200
    assert est.next_deadline() == 1500
    est.on_tick(10_000)
    assert est.next_deadline() is None


def test_single_process_deadline():
    est = single(100)
    est.on_heartbeat("q", 400)
    assert est.next_deadline() == 500


def test_snapshot_fig1_rows():
    est = new_estimator(fig1_set(), EstimatorConfig(Strategy.FIXED, 100), 0)
    for q in ("q2", "q4"):
        est.on_heartbeat(q, 150)
    est.on_tick(150)
    snap = est.snapshot(150)
    assert snap.trusted == {"q2", "q4"}
    assert str(snap.trust_level) == "1.4"
    assert snap.status is Status.NOT_TRUSTED
    est.on_tick(1000)
    snap = est.snapshot()
    assert snap.trust_level.micro == 0 and snap.status is Status.NOT_TRUSTED


@given(st.lists(st.integers(0, 300), max_size=30), st.integers(1, 400), st.lists(st.integers(1, 500), max_size=10))
def test_crash_stop_completeness(gaps, timeout, ticks_after):
    est = single(timeout)
    now = 0
    for gap in gaps:
        now += gap
        est.on_heartbeat("q", now)
        est.on_tick(now)
    crash_deadline = est.deadline("q")
    for dt in ticks_after:
        now += dt
        est.on_tick(now)
        if now > crash_deadline:
            assert "q" not in est.trusted()
    est.on_tick(crash_deadline + 1 + now)
    assert "q" not in est.trusted()


@given(
    timeout=st.integers(1, 200),
    increment=st.integers(1, 100),
    bound=st.integers(1, 1000),
    gaps=st.lists(st.integers(1, 1000), min_size=1, max_size=200),
)
def test_adaptive_stabilizes_under_bounded_gaps(timeout, increment, bound, gaps):
    est = single(timeout, Strategy.ADAPTIVE, increment)
    now = 0
    est.on_heartbeat("q", 0)
    for gap in gaps:
        gap = min(gap, bound)
        # evaluate at every millisecond of the gap, the harshest schedule
        for t in range(now + 1, now + gap):
            est.on_tick(t)
        now += gap
        est.on_heartbeat("q", now)
        est.on_tick(now)
    limit = max(0, math.ceil((bound - timeout) / increment)) + 1
    assert est.processes["q"].false_suspicions <= limit


class EstimatorMachine(RuleBasedStateMachine):
    """Random feeds against the alternation and monotonicity invariants."""

    def __init__(self):
        super().__init__()
        mset = validate_set({"a": "0.5", "b": "0.5", "c": "1"}, "1", "p")
        self.est = new_estimator(mset, EstimatorConfig(Strategy.ADAPTIVE, 50, 10, 5), 0)
        self.now = 0
        self.log = []
        self.timeouts = {q: 50 for q in mset.members}

    @rule(q=st.sampled_from(["a", "b", "c"]), dt=st.integers(0, 120))
    def heartbeat(self, q, dt):
        self.now += dt
        self.log += self.est.on_heartbeat(q, self.now)

    @rule(dt=st.integers(0, 120))
    def tick(self, dt):
        self.now += dt
        self.log += self.est.on_tick(self.now)

    @invariant()
    def alternation(self):
        for q in "abc":
            kinds = [tr.kind for tr in self.log if tr.q == q]
            assert all(x != y for x, y in zip(kinds, kinds[1:]))
            if kinds:
                assert kinds[0] is SUSPECT

    @invariant()
    def suspected_matches_log(self):
        for q, st_ in self.est.processes.items():
            kinds = [tr.kind for tr in self.log if tr.q == q]
            assert st_.suspected == (bool(kinds) and kinds[-1] is SUSPECT)

    @invariant()
    def timeouts_never_shrink(self):
        for q, st_ in self.est.processes.items():
            assert st_.current_timeout_ms >= self.timeouts[q] >= 50
            self.timeouts[q] = st_.current_timeout_ms


EstimatorMachine.TestCase.settings = settings(max_examples=50, stateful_step_count=40)
TestEstimatorMachine = EstimatorMachine.TestCase


@given(st.lists(st.tuples(st.booleans(), st.sampled_from("abc"), st.integers(0, 200)), max_size=60))
def test_deterministic(feed):
    def play():
        mset = validate_set({"a": "0.5", "b": "0.5", "c": "1"}, "1", "p")
        est = new_estimator(mset, EstimatorConfig(Strategy.ADAPTIVE, 80, 20), 0)
        now, out = 0, []
        for is_hb, q, dt in feed:
            now += dt
            out += est.on_heartbeat(q, now) if is_hb else est.on_tick(now)
        return out

    assert play() == play()
