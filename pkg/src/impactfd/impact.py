"""Trust level computation for a weighted monitored set.

Impact factors, fault margins and trust levels are held as exact
fixed-point integers counting millionths, so comparisons at the trust
limit never depend on binary rounding.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from functools import cached_property, total_ordering

SCALE = 1_000_000
FRACTION_DIGITS = 6

_DECIMAL_RE = re.compile(r"(\d*)(?:\.(\d*))?")


class ImpactError(ValueError):
    """Base class for monitored-set validation and lookup errors."""


class BadDecimal(ImpactError):
    def __init__(self, text):
        super().__init__(f"BadDecimal: {text!r} is not a nonnegative decimal with at most 6 fractional digits")
        self.text = text


class EmptySet(ImpactError):
    def __init__(self):
        super().__init__("EmptySet: the monitored set has no members")


class NonPositiveImpact(ImpactError):
    def __init__(self, q):
        super().__init__(f"NonPositiveImpact: impact factor of {q!r} must be > 0")
        self.process = q


class ImpactExceedsMargin(ImpactError):
    def __init__(self, q):
        super().__init__(f"ImpactExceedsMargin: impact factor of {q!r} exceeds the fault margin")
        self.process = q


class SumBelowMargin(ImpactError):
    def __init__(self, total, margin):
        super().__init__(f"SumBelowMargin: sum of impact factors {total} is below the fault margin {margin}")


class DuplicateId(ImpactError):
    def __init__(self, q):
        super().__init__(f"DuplicateId: process {q!r} listed more than once")
        self.process = q


class UnknownProcess(ImpactError):
    def __init__(self, q):
        super().__init__(f"UnknownProcess: {q!r} is not a member of the monitored set")
        self.process = q


@total_ordering
@dataclass(frozen=True)
class ImpactValue:
    """Nonnegative quantity stored as an integer number of millionths."""

    micro: int

    def __post_init__(self):
        if not isinstance(self.micro, int) or isinstance(self.micro, bool):
            raise TypeError("ImpactValue.micro must be an int")
        if self.micro < 0:
            raise ValueError("ImpactValue cannot be negative")

    @classmethod
    def parse(cls, text: str) -> ImpactValue:
        """Parse ``"1"``, ``"0.25"``, ``".5"`` or ``"2."``; no sign, no exponent.

        More than six fractional digits is an error rather than a rounding.
        """
        if not isinstance(text, str):
            raise BadDecimal(text)
        m = _DECIMAL_RE.fullmatch(text)
        if m is None:
            raise BadDecimal(text)
        whole, frac = m.group(1), m.group(2) or ""
        if not whole and not frac:
            raise BadDecimal(text)
        if len(frac) > FRACTION_DIGITS:
            raise BadDecimal(text)
        return cls(int(whole or "0") * SCALE + int(frac.ljust(FRACTION_DIGITS, "0")))

    def __str__(self):
        whole, frac = divmod(self.micro, SCALE)
        if frac == 0:
            return str(whole)
        return f"{whole}.{frac:06d}".rstrip("0")

    def __repr__(self):
        return f"ImpactValue('{self}')"

    def __add__(self, other):
        if not isinstance(other, ImpactValue):
            return NotImplemented
        return ImpactValue(self.micro + other.micro)

    def __sub__(self, other):
        if not isinstance(other, ImpactValue):
            return NotImplemented
        return ImpactValue(self.micro - other.micro)

    def __lt__(self, other):
        if not isinstance(other, ImpactValue):
            return NotImplemented
        return self.micro < other.micro


ZERO = ImpactValue(0)


def canonical(text: str) -> str:
    """Canonical spelling of a decimal string: ``"01.50"`` -> ``"1.5"``."""
    return str(ImpactValue.parse(text))


class Status(str, enum.Enum):
    TRUSTED = "TRUSTED"
    NOT_TRUSTED = "NOT_TRUSTED"

    @property
    def label(self) -> str:
        return self.value.replace("_", " ")


@dataclass(frozen=True)
class TrustSnapshot:
    at: int
    trusted: frozenset[str]
    trust_level: ImpactValue
    status: Status


@dataclass(frozen=True)
class MonitoredSet:
    """The processes watched by ``monitor``, with their impact factors.

    Build through :func:`validate_set`; instances are immutable.
    """

    members: Mapping[str, ImpactValue]
    fault_margin: ImpactValue
    monitor: str

    @cached_property
    def total(self) -> ImpactValue:
        return ImpactValue(sum(v.micro for v in self.members.values()))

    @cached_property
    def trust_limit(self) -> ImpactValue:
        return self.total - self.fault_margin

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.members))

    def __contains__(self, q):
        return q in self.members

    def to_json(self) -> dict:
        return {
            "members": {q: str(self.members[q]) for q in self.ids},
            "fault_margin": str(self.fault_margin),
            "monitor": self.monitor,
        }


def validate_set(members, fault_margin: str, monitor: str) -> MonitoredSet:
    """Parse and check a monitored set.

    ``members`` is a mapping of process id to decimal string, or an iterable
    of ``(id, decimal)`` pairs (the latter lets duplicates be reported).
    """
    pairs = list(members.items()) if isinstance(members, Mapping) else list(members)
    if not pairs:
        raise EmptySet()
    margin = ImpactValue.parse(fault_margin)
    parsed: dict[str, ImpactValue] = {}
    for q, text in pairs:
        if not isinstance(q, str) or not q:
            raise ImpactError(f"process id must be a non-empty string, got {q!r}")
        if q in parsed:
            raise DuplicateId(q)
        parsed[q] = ImpactValue.parse(text)
    for q, value in parsed.items():
        if value.micro == 0:
            raise NonPositiveImpact(q)
        if value > margin:
            raise ImpactExceedsMargin(q)
    total = ImpactValue(sum(v.micro for v in parsed.values()))
    if total < margin:
        raise SumBelowMargin(total, margin)
    if not isinstance(monitor, str) or not monitor:
        raise ImpactError("monitor id must be a non-empty string")
    return MonitoredSet(members=_FrozenDict(parsed), fault_margin=margin, monitor=monitor)


class _FrozenDict(dict):
    def _immutable(self, *args, **kwargs):
        raise TypeError("monitored set members are immutable")

    __setitem__ = __delitem__ = clear = pop = popitem = setdefault = update = _immutable

    def __hash__(self):
        return hash(frozenset(self.items()))


def sum_impacts(mset: MonitoredSet, subset: Iterable[str]) -> ImpactValue:
    members = mset.members
    total = 0
    for q in set(subset):
        try:
            total += members[q].micro
        except KeyError:
            raise UnknownProcess(q) from None
    return ImpactValue(total)


def status_of(mset: MonitoredSet, level: ImpactValue) -> Status:
    # equality with the limit is NOT_TRUSTED
    return Status.TRUSTED if level > mset.trust_limit else Status.NOT_TRUSTED


def trust_level(mset: MonitoredSet, trusted: Iterable[str], at: int = 0) -> TrustSnapshot:
    trusted = frozenset(trusted)
    level = sum_impacts(mset, trusted)
    return TrustSnapshot(at=at, trusted=trusted, trust_level=level, status=status_of(mset, level))


def status_via_untrusted(mset: MonitoredSet, untrusted: Iterable[str]) -> Status:
    """Same judgement as :func:`trust_level`, phrased over the untrusted side.

    S stays trusted exactly when the impact lost to untrusted processes is
    strictly below the fault margin.
    """
    lost = sum_impacts(mset, untrusted)
    return Status.TRUSTED if lost < mset.fault_margin else Status.NOT_TRUSTED


FIG1_IMPACTS = {"q1": "0.2", "q2": "0.8", "q3": "1", "q4": "0.6"}
FIG1_MARGIN = "1"
FIG1_FAILURES = {
    1: frozenset({"q1"}),
    2: frozenset({"q1", "q2"}),
    3: frozenset({"q4"}),
    4: frozenset({"q1", "q3"}),
    5: frozenset({"q3"}),
}


def fig1_set() -> MonitoredSet:
    return validate_set(FIG1_IMPACTS, FIG1_MARGIN, "p")


def fig1_table() -> list[TrustSnapshot]:
    """Worked example: four sensors, five failure patterns, perfect detection."""
    mset = fig1_set()
    return [
        trust_level(mset, set(mset.members) - failed, at=t)
        for t, failed in sorted(FIG1_FAILURES.items())
    ]
