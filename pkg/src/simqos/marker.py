"""Edge functions of the incentive model: policing, rate metering, drop-priority marking.

A packet's delay class is picked by the application. Its drop priority is
derived only from the flow's measured rate, the contract's nominal rate and
the delay class weight. The two are carried as separate fields and are
never re-marked inside the core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .engine import NS_PER_S
from .errors import InvalidContract, UnknownClass
from .traffic import SubscriberContract

MAX_PRIORITY = 7
# priority 4 is centred on the nominal rate; each octave above costs one level
_PRIORITY_OFFSET = 4.5
_NEAR_BOUNDARY = 1e-9


@dataclass(frozen=True)
class DelayClass:
    index: int
    share_weight: Fraction
    label: str

    @property
    def weight(self) -> float:
        return float(self.share_weight)


# best effort : voice : lowest delay  =  100 : 30 : 10 capacity units
DELAY_CLASSES = (
    DelayClass(0, Fraction(1, 10), "lowest-delay"),
    DelayClass(1, Fraction(3, 10), "voice"),
    DelayClass(2, Fraction(1), "best-effort"),
)
_WEIGHTS = tuple(c.weight for c in DELAY_CLASSES)


def delay_class(index: int) -> DelayClass:
    try:
        if index < 0:
            raise IndexError
        return DELAY_CLASSES[index]
    except (IndexError, TypeError):
        raise UnknownClass(index) from None


def active_classes(count: int = 3) -> tuple[int, ...]:
    """Class indices in use. Two-class mode drops the voice class and keeps 0 and 2."""
    if count == 3:
        return (0, 1, 2)
    if count == 2:
        return (0, 2)
    raise ValueError(f"delay class count must be 2 or 3, got {count}")


def _exact_priority(mbr: float, nbr: float, cls: int) -> int:
    # p >= k  <=>  x <= 2**(4.5 - k)  <=>  x**2 <= 2**(9 - 2k), with x = MBR / (w * NBR)
    x = Fraction(mbr) / (DELAY_CLASSES[cls].share_weight * Fraction(nbr))
    x2 = x * x
    for k in range(MAX_PRIORITY, 0, -1):
        if x2 <= Fraction(2) ** (9 - 2 * k):
            return k
    return 0


def compute_priority(mbr: float, nbr: float, cls: int) -> int:
    """Drop priority in [0, 7] for a flow metered at ``mbr`` with nominal rate ``nbr``.

    ``floor(4.5 - log2((mbr / w) / nbr))`` clamped to [0, 7], where ``w`` is
    the class share weight. Values within 1e-9 of an integer boundary are
    settled with rational arithmetic so the floor is never off by one.
    """
    if not nbr > 0:
        raise InvalidContract(f"nominal bit rate must be > 0, got {nbr}")
    if cls < 0 or cls >= len(_WEIGHTS):
        raise UnknownClass(cls)
    if mbr <= 0:
        return MAX_PRIORITY
    v = _PRIORITY_OFFSET - math.log2(mbr / _WEIGHTS[cls] / nbr)
    if v >= MAX_PRIORITY + 1:
        return MAX_PRIORITY
    if v < 0:
        return 0
    f = math.floor(v)
    if v - f < _NEAR_BOUNDARY or f + 1 - v < _NEAR_BOUNDARY:
        return _exact_priority(mbr, nbr, cls)
    return min(f, MAX_PRIORITY)


def max_rate_for_priority(priority: int, nbr: float, cls: int) -> float:
    """Largest metered rate that still earns ``priority`` (for priorities 1..7)."""
    return _WEIGHTS[cls] * nbr * 2.0 ** (_PRIORITY_OFFSET - priority)


@dataclass
class FlowMeter:
    """Exponentially decaying estimate of a flow's momentary bit rate."""

    flow_id: str
    time_constant: int = 100_000_000  # ns
    mbr: float = 0.0
    last_update: int | None = None

    def __post_init__(self):
        if self.time_constant <= 0:
            raise ValueError("meter time constant must be > 0")


def update_meter(meter: FlowMeter, size_bits: int, now: int) -> float:
    tau = meter.time_constant / NS_PER_S
    if meter.last_update is not None and now < meter.last_update:
        raise ValueError("meter updated with a time in its past")
    dt_ns = 0 if meter.last_update is None else now - meter.last_update
    if dt_ns < 1:
        meter.mbr += size_bits / tau
    else:
        dt = dt_ns / NS_PER_S
        keep = math.exp(-dt / tau)
        meter.mbr = keep * meter.mbr + (-math.expm1(-dt / tau)) * (size_bits / dt)
    meter.last_update = now
    return meter.mbr


class TokenBucket:
    """Policer bucket in bits. Starts full."""

    __slots__ = ("rate", "depth", "tokens", "last")

    def __init__(self, rate: float, depth: float, now: int = 0):
        self.rate = float(rate)
        self.depth = float(depth)
        self.tokens = self.depth
        self.last = now

    def refill(self, now: int) -> None:
        if now > self.last:
            self.tokens = min(self.depth, self.tokens + self.rate * (now - self.last) / NS_PER_S)
            self.last = now

    def consume(self, size_bits: int, now: int) -> bool:
        self.refill(now)
        if size_bits <= self.tokens:
            self.tokens -= size_bits
            return True
        return False

    def reconfigure(self, rate: float, depth: float, now: int) -> None:
        self.refill(now)
        self.rate = float(rate)
        self.depth = float(depth)
        self.tokens = min(self.tokens, self.depth)


def police_bucket(contract: SubscriberContract, rtt_ns: int, now: int = 0) -> TokenBucket:
    """Bucket filling at the access cap, one round trip deep."""
    cap = contract.access_rate_cap
    return TokenBucket(cap, cap * rtt_ns / NS_PER_S, now)


def police(packet, contract: SubscriberContract, bucket: TokenBucket, now: int) -> bool:
    """True (pass) if the bucket covers ``packet.size_bits``; False means drop.

    A packet bigger than the bucket depth can never pass. ``contract`` is
    accepted for symmetry with the other edge functions; the bucket already
    carries the contract's rate (see :func:`police_bucket`).
    """
    return bucket.consume(packet.size_bits, now)


class Packet:
    __slots__ = ("id", "flow_id", "subscriber_id", "size_bits", "delay_class", "drop_priority",
                 "created_at", "marked_at", "route", "hop", "enqueued_at", "queue_wait", "owner")

    def __init__(self, id, flow_id, subscriber_id, size_bits, delay_class, created_at, route=(),
                 owner=None):
        if size_bits <= 0:
            raise ValueError("packet size must be > 0")
        self.id = id
        self.flow_id = flow_id
        self.subscriber_id = subscriber_id
        self.size_bits = size_bits
        self.delay_class = delay_class
        self.drop_priority: int | None = None
        self.created_at = created_at
        self.marked_at: int | None = None
        self.route = route
        self.hop = 0
        self.enqueued_at = 0
        self.queue_wait = 0
        self.owner = owner

    def __repr__(self):
        return (f"Packet(id={self.id}, flow={self.flow_id}, class={self.delay_class}, "
                f"prio={self.drop_priority}, bits={self.size_bits})")


def mark(packet: Packet, meter: FlowMeter, contract: SubscriberContract, cls: int, now: int,
         nbr: float | None = None) -> Packet:
    """Meter first, then stamp delay class and drop priority on ``packet``.

    ``nbr`` is the flow's share of the contract's nominal rate; it defaults
    to the whole contract rate.
    """
    if packet.marked_at is not None:
        raise ValueError(f"packet {packet.id} is already marked")
    rate = update_meter(meter, packet.size_bits, now)
    packet.delay_class = cls
    packet.drop_priority = compute_priority(rate, contract.nbr if nbr is None else nbr, cls)
    packet.marked_at = now
    return packet


# 6-bit field: bits 5-4 delay class, bit 3 reserved (zero), bits 2-0 drop priority
def encode_field(cls: int, priority: int) -> int:
    if not 0 <= cls <= 2:
        raise UnknownClass(cls)
    if not 0 <= priority <= MAX_PRIORITY:
        raise ValueError(f"drop priority out of range: {priority}")
    return (cls << 4) | priority


def decode_field(value: int) -> tuple[int, int]:
    if not 0 <= value < 64 or value & 0b1000:
        raise ValueError(f"not a valid marking field: {value:#04x}")
    cls = value >> 4
    if cls > 2:
        raise UnknownClass(cls)
    return cls, value & 0b111
