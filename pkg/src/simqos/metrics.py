"""Flow and class measurements, fairness and delay statistics, report finalization."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import AllZero, ConservationViolation, EmptySamples

# one-way budget: half of a 250 ms round trip
VOICE_BUDGET_NS = 125_000_000

DROP_REASONS = ("police", "priority", "full", "limit", "action")

FLOW_CSV_COLUMNS = ("flow_id", "class", "priority_mean", "sent_bits", "delivered_bits",
                    "drop_pri", "drop_full", "goodput_bps", "delay_p50_ns", "delay_p95_ns",
                    "delay_p99_ns")
CLASS_CSV_COLUMNS = ("class", "goodput_share", "jain", "p99_delay_ns", "over_budget_frac")
CONNECTION_CSV_COLUMNS = ("source_id", "requests", "admitted", "queued", "blocked", "blocking")
ACTION_CSV_COLUMNS = ("time_ns", "level", "kind", "target", "outcome")


def jain_index(values) -> float:
    """(sum x)^2 / (n * sum x^2) for nonnegative values, not all zero."""
    xs = [float(v) for v in values]
    if any(x < 0 for x in xs):
        raise ValueError("Jain's index needs nonnegative values")
    top = max(xs, default=0.0)
    if top == 0:
        raise AllZero("Jain's index needs at least one positive value")
    # scale by the maximum so tiny values do not underflow when squared
    xs = [x / top for x in xs]
    sq = math.fsum(x * x for x in xs)
    total = math.fsum(xs)
    return total * total / (len(xs) * sq)


def percentile(samples, p) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample."""
    if not samples:
        raise EmptySamples("percentile of an empty sample set")
    if not 0 < p <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {p}")
    ordered = sorted(samples)
    # decimal reading of p keeps e.g. 99.9 from rounding up a rank
    rank = math.ceil(Fraction(str(p)) * len(ordered) / 100)
    return ordered[max(rank, 1) - 1]


@dataclass
class FlowCounters:
    """Mutable per-flow tallies kept by the engine while a run is in progress."""

    flow_id: str
    delay_class: int
    subscriber_id: str = ""
    sent_packets: int = 0
    sent_bits: int = 0
    delivered_packets: int = 0
    delivered_bits: int = 0
    window_bits: int = 0
    dropped: dict = field(default_factory=lambda: dict.fromkeys(DROP_REASONS, 0))
    priority_sum: int = 0
    priority_count: int = 0
    delays: list = field(default_factory=list)
    queue_delays: list = field(default_factory=list)

    @property
    def dropped_packets(self) -> int:
        return sum(self.dropped.values())


@dataclass
class ConnectionCounters:
    source_id: str
    requests: int = 0
    admitted: int = 0
    queued: int = 0
    blocked: int = 0


class Collector:
    """Raw counters filled during a run and turned into a :class:`Report` by :func:`finalize`."""

    def __init__(self, warmup_end: int):
        self.warmup_end = warmup_end
        self.flows: dict[str, FlowCounters] = {}
        self.connections: dict[str, ConnectionCounters] = {}
        self.class_delays: dict[int, list] = defaultdict(list)
        self.class_queue_delays: dict[int, list] = defaultdict(list)
        self.class_window_bits: dict[int, int] = defaultdict(int)
        self.actions: list[tuple] = []

    def flow(self, flow_id, delay_class, subscriber_id="") -> FlowCounters:
        c = self.flows.get(flow_id)
        if c is None:
            c = self.flows[flow_id] = FlowCounters(flow_id, delay_class, subscriber_id)
        return c

    def connection(self, source_id) -> ConnectionCounters:
        c = self.connections.get(source_id)
        if c is None:
            c = self.connections[source_id] = ConnectionCounters(source_id)
        return c

    def sent(self, packet) -> None:
        c = self.flows[packet.flow_id]
        c.sent_packets += 1
        c.sent_bits += packet.size_bits

    def marked(self, packet) -> None:
        c = self.flows[packet.flow_id]
        c.priority_sum += packet.drop_priority
        c.priority_count += 1

    def dropped(self, packet, reason: str) -> None:
        self.flows[packet.flow_id].dropped[reason] += 1

    def delivered(self, packet, now: int) -> None:
        c = self.flows[packet.flow_id]
        c.delivered_packets += 1
        c.delivered_bits += packet.size_bits
        if now >= self.warmup_end:
            delay = now - packet.created_at
            cls = packet.delay_class
            c.window_bits += packet.size_bits
            c.delays.append(delay)
            c.queue_delays.append(packet.queue_wait)
            self.class_delays[cls].append(delay)
            self.class_queue_delays[cls].append(packet.queue_wait)
            self.class_window_bits[cls] += packet.size_bits


@dataclass(frozen=True)
class FlowMetrics:
    flow_id: str
    delay_class: int
    subscriber_id: str
    sent_packets: int
    sent_bits: int
    delivered_packets: int
    delivered_bits: int
    dropped: tuple  # ((reason, count), ...)
    in_flight: int
    goodput_bps: float
    priority_mean: float | None
    delay_p50_ns: int | None
    delay_p95_ns: int | None
    delay_p99_ns: int | None
    queue_delay_p99_ns: int | None
    over_budget_frac: float | None

    def drops(self, reason: str) -> int:
        return dict(self.dropped)[reason]

    @property
    def dropped_packets(self) -> int:
        return sum(n for _, n in self.dropped)

    @property
    def loss_ratio(self) -> float:
        return self.dropped_packets / self.sent_packets if self.sent_packets else 0.0


@dataclass(frozen=True)
class ClassSummary:
    delay_class: int
    goodput_bps: float
    goodput_share: float | None
    jain: float | None
    p50_delay_ns: int | None
    p99_delay_ns: int | None
    p99_queue_delay_ns: int | None
    over_budget_frac: float | None


@dataclass(frozen=True)
class ConnectionMetrics:
    source_id: str
    requests: int
    admitted: int
    queued: int
    blocked: int

    @property
    def blocking(self) -> float | None:
        return self.blocked / self.requests if self.requests else None


@dataclass(frozen=True)
class Report:
    seed: int
    scenario: str  # canonical JSON echo
    duration_ns: int
    window_ns: int
    flows: tuple[FlowMetrics, ...]
    classes: tuple[ClassSummary, ...]
    jain: tuple  # ((group, value or None), ...)
    connections: tuple[ConnectionMetrics, ...] = ()
    actions: tuple = ()

    def flow(self, flow_id: str) -> FlowMetrics:
        for f in self.flows:
            if f.flow_id == flow_id:
                return f
        raise KeyError(flow_id)

    def class_summary(self, cls: int) -> ClassSummary:
        for c in self.classes:
            if c.delay_class == cls:
                return c
        raise KeyError(cls)

    @property
    def sent_packets(self) -> int:
        return sum(f.sent_packets for f in self.flows)

    @property
    def delivered_packets(self) -> int:
        return sum(f.delivered_packets for f in self.flows)

    def flows_csv(self) -> str:
        rows = [[f.flow_id, f.delay_class, _fmt(f.priority_mean, 4), f.sent_bits,
                 f.delivered_bits, f.drops("priority"), f.drops("full"),
                 _fmt(f.goodput_bps, 3), _fmt(f.delay_p50_ns), _fmt(f.delay_p95_ns),
                 _fmt(f.delay_p99_ns)] for f in self.flows]
        return _csv(FLOW_CSV_COLUMNS, rows)

    def classes_csv(self) -> str:
        rows = [[c.delay_class, _fmt(c.goodput_share, 6), _fmt(c.jain, 6),
                 _fmt(c.p99_delay_ns), _fmt(c.over_budget_frac, 6)] for c in self.classes]
        return _csv(CLASS_CSV_COLUMNS, rows)

    def connections_csv(self) -> str:
        rows = [[c.source_id, c.requests, c.admitted, c.queued, c.blocked,
                 _fmt(c.blocking, 6)] for c in self.connections]
        return _csv(CONNECTION_CSV_COLUMNS, rows)

    def actions_csv(self) -> str:
        return _csv(ACTION_CSV_COLUMNS, [list(a) for a in self.actions])


def _fmt(value, digits=None) -> str:
    if value is None:
        return ""
    if digits is None:
        return str(value)
    return f"{value:.{digits}f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _pct(samples, p):
    return percentile(samples, p) if samples else None


def _budget(samples):
    if not samples:
        return None
    return sum(1 for d in samples if d > VOICE_BUDGET_NS) / len(samples)


def _jain_or_none(values):
    try:
        return jain_index(values)
    except AllZero:
        return None


def finalize(collector: Collector, in_flight: dict, *, seed: int, scenario: str,
             duration_ns: int, classes=(0, 1, 2)) -> Report:
    """Freeze raw counters into a Report, checking per-flow conservation exactly.

    ``in_flight`` maps flow id to packets still queued or on a wire at the end.
    """
    window_ns = duration_ns - collector.warmup_end
    window_s = window_ns / 1e9 if window_ns > 0 else None
    flows = []
    for fid in sorted(collector.flows):
        c = collector.flows[fid]
        held = in_flight.get(fid, 0)
        if c.sent_packets != c.delivered_packets + c.dropped_packets + held:
            raise ConservationViolation(
                f"flow {fid}: sent={c.sent_packets} delivered={c.delivered_packets} "
                f"dropped={c.dropped_packets} in_flight={held}")
        flows.append(FlowMetrics(
            flow_id=fid, delay_class=c.delay_class, subscriber_id=c.subscriber_id,
            sent_packets=c.sent_packets, sent_bits=c.sent_bits,
            delivered_packets=c.delivered_packets, delivered_bits=c.delivered_bits,
            dropped=tuple((r, c.dropped[r]) for r in DROP_REASONS), in_flight=held,
            goodput_bps=c.window_bits / window_s if window_s else 0.0,
            priority_mean=c.priority_sum / c.priority_count if c.priority_count else None,
            delay_p50_ns=_pct(c.delays, 50), delay_p95_ns=_pct(c.delays, 95),
            delay_p99_ns=_pct(c.delays, 99), queue_delay_p99_ns=_pct(c.queue_delays, 99),
            over_budget_frac=_budget(c.delays)))
    extra = set(collector.class_window_bits) - set(classes)
    all_classes = sorted(set(classes) | extra)
    total_bits = sum(collector.class_window_bits.values())
    summaries = []
    for cls in all_classes:
        bits = collector.class_window_bits.get(cls, 0)
        members = [f.goodput_bps for f in flows if f.delay_class == cls]
        delays = collector.class_delays.get(cls, [])
        summaries.append(ClassSummary(
            delay_class=cls,
            goodput_bps=bits / window_s if window_s else 0.0,
            goodput_share=bits / total_bits if total_bits else None,
            jain=_jain_or_none(members) if members else None,
            p50_delay_ns=_pct(delays, 50),
            p99_delay_ns=_pct(delays, 99),
            p99_queue_delay_ns=_pct(collector.class_queue_delays.get(cls, []), 99),
            over_budget_frac=_budget(delays)))
    jain = [("all", _jain_or_none([f.goodput_bps for f in flows]) if flows else None)]
    jain += [(f"class{s.delay_class}", s.jain) for s in summaries]
    conns = tuple(ConnectionMetrics(c.source_id, c.requests, c.admitted, c.queued, c.blocked)
                  for _, c in sorted(collector.connections.items()))
    return Report(seed=seed, scenario=scenario, duration_ns=duration_ns, window_ns=window_ns,
                  flows=tuple(flows), classes=tuple(summaries), jain=tuple(jain),
                  connections=conns, actions=tuple(collector.actions))
