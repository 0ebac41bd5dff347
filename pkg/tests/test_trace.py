import pytest

from impactfd.impact import ImpactValue, Status
from impactfd.sim import run
from impactfd.scenario import builtin_scenario
from impactfd.trace import (
    Event,
    EventKind,
    MalformedTrace,
    ParseError,
    Trace,
    TraceHeader,
    deserialize,
    failure_pattern,
    sample_event,
    serialize,
)

HEADER = TraceHeader("ab12", 42, "0.1.0")


def crash(t, q):
    return Event(t, EventKind.CRASH, q=q)


def test_round_trip_sim_trace():
    trace = run(builtin_scenario("cds"), 4)
    data = serialize(trace)
    assert deserialize(data) == trace
    assert serialize(deserialize(data)) == data


def test_header_only():
    data = serialize(Trace(HEADER, []))
    assert data == b'{"scenario":"ab12","seed":42,"version":"0.1.0"}\n'
    assert deserialize(data) == Trace(HEADER, [])


def test_line_format():
    trace = Trace(HEADER, [
        Event(5, EventKind.HB_SEND, q="q1", seq=3),
        crash(6, "q2"),
        sample_event(7, {"q3", "q1"}, ImpactValue.parse("1.20"), Status.NOT_TRUSTED),
    ])
    lines = serialize(trace).decode().splitlines()[1:]
    assert lines == [
        '{"t":5,"e":"hb_send","q":"q1","seq":3}',
        '{"t":6,"e":"crash","q":"q2"}',
        '{"t":7,"e":"sample","trusted":["q1","q3"],"level":"1.2","status":"NOT_TRUSTED"}',
    ]


@pytest.mark.parametrize("line,where", [
    ('{"t":1,"e":"explode","q":"q1"}', "unknown event type"),
    ('{"t":-1,"e":"crash","q":"q1"}', "'t'"),
    ('{"t":1,"e":"hb_recv","q":"q1"}', "'seq'"),
    ('{"t":1,"e":"sample","trusted":["q1"],"level":"0.1234567","status":"TRUSTED"}', "bad level"),
    ('{"t":1,"e":"sample","trusted":["q1"],"level":"1","status":"MAYBE"}', "bad status"),
    ("not json", "invalid JSON"),
])
def test_parse_errors(line, where):
    data = serialize(Trace(HEADER, [])) + line.encode() + b"\n"
    with pytest.raises(ParseError) as exc:
        deserialize(data)
    assert exc.value.line == 2
    assert where in exc.value.reason


def test_missing_header():
    with pytest.raises(ParseError):
        deserialize(b"")
    with pytest.raises(ParseError):
        deserialize(b'{"t":1,"e":"crash","q":"q1"}\n')


def test_failure_pattern_inclusive():
    fp = failure_pattern(Trace(HEADER, [crash(5000, "q1")]))
    assert fp.at(4999) == frozenset()
    assert fp.at(5000) == {"q1"}


def test_failure_pattern_union():
    fp = failure_pattern(Trace(HEADER, [crash(10, "q1"), crash(20, "q2")]))
    assert fp.at(15) == {"q1"}
    assert fp.faulty == {"q1", "q2"}


def test_failure_pattern_no_crash_correct_is_s():
    trace = run(builtin_scenario("healthcare"), 1)
    trace.events = [ev for ev in trace.events if ev.e is not EventKind.CRASH]
    fp = failure_pattern(trace)
    assert fp.correct == {"q1", "q2", "q3", "q4"}
    assert fp.faulty == frozenset()


def test_failure_pattern_malformed():
    with pytest.raises(MalformedTrace):
        failure_pattern(Trace(HEADER, [crash(10, "q1"), crash(5, "q2")]))
    with pytest.raises(MalformedTrace):
        failure_pattern(Trace(HEADER, [crash(1, "q1"), crash(2, "q1")]))
