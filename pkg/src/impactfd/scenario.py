"""Simulation scenarios: monitored set, estimator, network model and crash schedule."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .impact import MonitoredSet, validate_set
from .liveness import EstimatorConfig


class InvalidScenario(ValueError):
    def __init__(self, detail):
        super().__init__(f"InvalidScenario: {detail}")
        self.detail = detail


def _int(obj, key, default=None):
    value = obj.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvalidScenario(f"{key} must be an integer, got {value!r}")
    return value


def parse_probability(value) -> Fraction:
    try:
        p = Fraction(str(value)) if not isinstance(value, Fraction) else value
    except (ValueError, ZeroDivisionError):
        raise InvalidScenario(f"loss_prob {value!r} is not a number") from None
    if not 0 <= p <= 1:
        raise InvalidScenario(f"loss_prob {value!r} outside [0, 1]")
    return p


def _fmt_probability(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


@dataclass(frozen=True)
class NetworkModel:
    min_delay_ms: int = 0
    max_delay_ms: int = 0
    loss_prob: Fraction = Fraction(0)
    gst_ms: int | None = None
    post_gst_delay_ms: int = 0

    def __post_init__(self):
        object.__setattr__(self, "loss_prob", parse_probability(self.loss_prob))
        if not 0 <= self.min_delay_ms <= self.max_delay_ms:
            raise InvalidScenario("need 0 <= min_delay_ms <= max_delay_ms")
        if not self.min_delay_ms <= self.post_gst_delay_ms <= self.max_delay_ms:
            raise InvalidScenario("need min_delay_ms <= post_gst_delay_ms <= max_delay_ms")
        if self.gst_ms is not None and self.gst_ms < 0:
            raise InvalidScenario("gst_ms must be nonnegative")

    def after_gst(self, t: int) -> bool:
        return self.gst_ms is not None and t >= self.gst_ms

    @classmethod
    def from_json(cls, obj: dict) -> NetworkModel:
        gst = obj.get("gst_ms")
        if gst is not None:
            gst = _int(obj, "gst_ms")
        max_delay = _int(obj, "max_delay_ms", 0)
        return cls(
            min_delay_ms=_int(obj, "min_delay_ms", 0),
            max_delay_ms=max_delay,
            loss_prob=obj.get("loss_prob", "0"),
            gst_ms=gst,
            post_gst_delay_ms=_int(obj, "post_gst_delay_ms", max_delay),
        )

    def to_json(self) -> dict:
        return {
            "min_delay_ms": self.min_delay_ms,
            "max_delay_ms": self.max_delay_ms,
            "loss_prob": _fmt_probability(self.loss_prob),
            "gst_ms": self.gst_ms,
            "post_gst_delay_ms": self.post_gst_delay_ms,
        }


@dataclass(frozen=True)
class Scenario:
    name: str
    set: MonitoredSet
    heartbeat_period_ms: int
    estimator: EstimatorConfig
    network: NetworkModel
    crashes: tuple[tuple[str, int], ...]
    duration_ms: int
    sample_period_ms: int

    def __post_init__(self):
        if self.heartbeat_period_ms <= 0 or self.duration_ms <= 0 or self.sample_period_ms <= 0:
            raise InvalidScenario("heartbeat_period_ms, duration_ms and sample_period_ms must be positive")
        seen = set()
        for q, at in self.crashes:
            if q not in self.set:
                raise InvalidScenario(f"crash of unknown process {q!r}")
            if q in seen:
                raise InvalidScenario(f"more than one crash scheduled for {q!r}")
            if not 0 <= at < self.duration_ms:
                raise InvalidScenario(f"crash time {at} of {q!r} not in [0, duration_ms)")
            seen.add(q)

    @property
    def crash_times(self) -> dict[str, int]:
        return dict(self.crashes)

    @classmethod
    def from_json(cls, obj: dict) -> Scenario:
        try:
            s = obj["set"]
            try:
                estimator = EstimatorConfig.from_json(obj["estimator"])
            except ValueError as e:
                raise InvalidScenario(f"estimator: {e}") from None
            mset = validate_set(members_from_json(s["members"]), s["fault_margin"], s.get("monitor", "p"))
            crashes = tuple((c["process"], _int(c, "crash_at_ms")) for c in obj.get("crashes", []))
            return cls(
                name=obj.get("name", "unnamed"),
                set=mset,
                heartbeat_period_ms=_int(obj, "heartbeat_period_ms"),
                estimator=estimator,
                network=NetworkModel.from_json(obj.get("network", {})),
                crashes=crashes,
                duration_ms=_int(obj, "duration_ms"),
                sample_period_ms=_int(obj, "sample_period_ms"),
            )
        except KeyError as e:
            raise InvalidScenario(f"missing field {e.args[0]!r}") from None
        except (TypeError, AttributeError) as e:
            raise InvalidScenario(str(e)) from None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "set": self.set.to_json(),
            "heartbeat_period_ms": self.heartbeat_period_ms,
            "estimator": self.estimator.to_json(),
            "network": self.network.to_json(),
            "crashes": [{"process": q, "crash_at_ms": at} for q, at in self.crashes],
            "duration_ms": self.duration_ms,
            "sample_period_ms": self.sample_period_ms,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def members_from_json(obj):
    # a list of pairs survives JSON with duplicate ids intact
    if isinstance(obj, dict):
        return obj
    return [tuple(pair) for pair in obj]


def _reject_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            # keep the pairs so validate_set reports DuplicateId
            return _Dup(pairs)
        out[k] = v
    return out


class _Dup(list):
    pass


def load_json(text: str) -> dict:
    obj = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    if isinstance(obj, _Dup):
        raise InvalidScenario("duplicate keys in top-level object")
    return obj


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        obj = load_json(fh.read())
    return scenario_from_obj(obj)


def scenario_from_obj(obj) -> Scenario:
    if not isinstance(obj, dict):
        raise InvalidScenario("scenario file must hold a JSON object")
    return Scenario.from_json(obj)


def builtin_scenarios() -> list[Scenario]:
    out = []
    for name in ("healthcare", "cds"):
        text = resources.files("impactfd.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
        out.append(scenario_from_obj(load_json(text)))
    return out


def builtin_scenario(name: str) -> Scenario:
    for sc in builtin_scenarios():
        if sc.name == name:
            return sc
    raise KeyError(name)

