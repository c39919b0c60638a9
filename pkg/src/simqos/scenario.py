"""Scenario documents: JSON schema, exhaustive validation, and the typed config.

Every problem in a document is reported in one pass, each with a path such
as ``links[0].capacity``. Unknown keys are errors.

Times in the document are seconds; rates are bits per second; queue sizes
are bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .engine import Link, Topology, seconds_to_ns
from .errors import InvalidScenario
from .marker import active_classes
from .node import DEFAULT_QUEUE_BYTES
from .servicemodels import ACTION_MATRIX, ActionKind, Level, QosAction, ServiceModel
from .traffic import AimdParams, MediaParams, SourceKind, SourceSpec, SubscriberContract


class ErrorKind(str, Enum):
    SYNTAX = "SyntaxError"
    UNKNOWN_KEY = "UnknownKey"
    RANGE = "RangeViolation"
    DANGLING = "DanglingReference"
    INVALID_ACTION = "InvalidAction"


@dataclass(frozen=True)
class ScenarioError:
    kind: ErrorKind
    path: str
    message: str

    def __str__(self):
        where = self.path or "<document>"
        return f"{self.kind.value} at {where}: {self.message}"


@dataclass(frozen=True)
class ConnectionArrivalSpec:
    """Poisson stream of connection requests (connection-oriented model only)."""

    id: str
    src: str
    dst: str
    arrival_rate: float  # requests per second
    mean_holding: float  # seconds
    peak_rate: float
    delay_class: int = 2
    packet_size_bits: int = 12_000
    emit_packets: bool = False
    subscriber_id: str | None = None


@dataclass(frozen=True)
class WaitingQueueParams:
    enabled: bool = False
    capacity: int = 16
    timeout: int = 10_000_000_000


@dataclass(frozen=True)
class Parameters:
    meter_time_constant: int = 100_000_000
    queue_bytes: dict = field(default_factory=lambda: dict(DEFAULT_QUEUE_BYTES))
    fifo_queue_bytes: int = 512_000
    delay_classes: int = 3
    feedback_rtt: int = 20_000_000
    nbr_split: str = "equal"
    node_mode: str = "dynamic"
    static_class_shares: dict = field(default_factory=dict)
    waiting_queue: WaitingQueueParams = field(default_factory=WaitingQueueParams)
    utilization_factor: float = 1.0

    @property
    def classes(self) -> tuple[int, ...]:
        return active_classes(self.delay_classes)


@dataclass(frozen=True)
class ScenarioConfig:
    duration: int  # ns
    service_model: ServiceModel
    topology: Topology
    subscribers: tuple[SubscriberContract, ...] = ()
    sources: tuple[SourceSpec, ...] = ()
    connection_arrivals: tuple[ConnectionArrivalSpec, ...] = ()
    timeline: tuple[QosAction, ...] = ()
    parameters: Parameters = field(default_factory=Parameters)
    warmup_fraction: float = 0.2
    document: dict = field(default_factory=dict, compare=False)

    @property
    def warmup_end(self) -> int:
        return int(self.duration * self.warmup_fraction)

    def canonical_json(self) -> str:
        return json.dumps(self.document, sort_keys=True, separators=(",", ":"))


# -- schema ------------------------------------------------------------------------

_TOP_KEYS = {"duration", "service_model", "warmup_fraction", "topology", "subscribers",
             "sources", "connection_arrivals", "timeline", "parameters", "description"}
_TOPO_KEYS = {"nodes", "edge_nodes", "links"}
_LINK_KEYS = {"id", "src", "dst", "capacity", "propagation_delay"}
_SUB_KEYS = {"id", "nbr", "access_rate_cap", "price_class"}
_SRC_KEYS = {"id", "subscriber", "device", "kind", "src", "dst", "packet_size_bits",
             "delay_class", "rate", "start", "stop", "start_jitter", "aimd", "media"}
_AIMD_KEYS = {"additive_step", "decrease_factor", "min_rate", "tick"}
_MEDIA_KEYS = {"rungs", "loss_threshold", "window", "initial_rung"}
_ARR_KEYS = {"id", "src", "dst", "arrival_rate", "mean_holding", "peak_rate", "delay_class",
             "packet_size_bits", "emit_packets", "subscriber"}
_TL_KEYS = {"at", "level", "kind", "target", "params"}
_PARAM_KEYS = {"meter_time_constant", "queue_bytes", "fifo_queue_bytes", "delay_classes",
               "feedback_rtt", "nbr_split", "node_mode", "static_class_shares",
               "waiting_queue", "utilization_factor"}
_WAIT_KEYS = {"enabled", "capacity", "timeout"}

# params each action cell understands
_ACTION_PARAMS = {
    (Level.SUBSCRIBER, ActionKind.SERVE_IMMEDIATELY): set(),
    (Level.SUBSCRIBER, ActionKind.CHANGE_STATUS): {"nbr", "delay_class", "price_class"},
    (Level.SUBSCRIBER, ActionKind.LIMIT_SIZE): {"access_rate_cap", "data_volume_bits"},
    (Level.SUBSCRIBER, ActionKind.REJECT): set(),
    (Level.DEVICE, ActionKind.SERVE_IMMEDIATELY): set(),
    (Level.DEVICE, ActionKind.CHANGE_STATUS): {"delay_class"},
    (Level.DEVICE, ActionKind.LIMIT_SIZE): {"access_rate_cap"},
    (Level.DEVICE, ActionKind.REJECT): set(),
    (Level.AGGREGATE, ActionKind.SERVE_IMMEDIATELY): set(),
    (Level.AGGREGATE, ActionKind.SERVE_LATER): {"after"},
    (Level.AGGREGATE, ActionKind.CHANGE_STATUS): {"label"},
    (Level.AGGREGATE, ActionKind.LIMIT_SIZE): {"max_rate"},
    (Level.AGGREGATE, ActionKind.REJECT): set(),
    (Level.CONNECTION, ActionKind.SERVE_IMMEDIATELY): set(),
    (Level.CONNECTION, ActionKind.SERVE_LATER): set(),
    (Level.CONNECTION, ActionKind.CHANGE_STATUS): {"delay_class"},
    (Level.CONNECTION, ActionKind.LIMIT_SIZE): {"peak_rate"},
    (Level.CONNECTION, ActionKind.REJECT): set(),
    (Level.PACKET, ActionKind.SERVE_IMMEDIATELY): set(),
    (Level.PACKET, ActionKind.SERVE_LATER): set(),
    (Level.PACKET, ActionKind.CHANGE_STATUS): {"delay_class"},
    (Level.PACKET, ActionKind.REJECT): set(),
}

_MISSING = object()


class _Checker:
    def __init__(self):
        self.errors: list[ScenarioError] = []

    def err(self, kind, path, msg):
        self.errors.append(ScenarioError(kind, path, msg))

    def obj(self, value, path, allowed) -> dict | None:
        if not isinstance(value, dict):
            self.err(ErrorKind.RANGE, path, "expected an object")
            return None
        for k in value:
            if k not in allowed:
                self.err(ErrorKind.UNKNOWN_KEY, f"{path}.{k}" if path else k, "unknown key")
        return value

    def lst(self, d, key, path, required=False) -> list:
        v = d.get(key, _MISSING)
        if v is _MISSING:
            if required:
                self.err(ErrorKind.RANGE, _join(path, key), "required")
            return []
        if not isinstance(v, list):
            self.err(ErrorKind.RANGE, _join(path, key), "expected a list")
            return []
        return v

    def num(self, d, key, path, *, default=_MISSING, lo=None, hi=None, lo_open=False,
            hi_open=False, integer=False):
        v = d.get(key, _MISSING)
        p = _join(path, key)
        if v is _MISSING or v is None and default is not _MISSING:
            if default is _MISSING:
                self.err(ErrorKind.RANGE, p, "required")
                return None
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.err(ErrorKind.RANGE, p, "expected a finite number")
            return None
        if integer and v != int(v):
            self.err(ErrorKind.RANGE, p, "expected an integer")
            return None
        bad = ((lo is not None and (v < lo or (lo_open and v == lo)))
               or (hi is not None and (v > hi or (hi_open and v == hi))))
        if bad:
            lo_s = "" if lo is None else ("(" if lo_open else "[") + f"{lo}"
            hi_s = "" if hi is None else f"{hi}" + (")" if hi_open else "]")
            self.err(ErrorKind.RANGE, p, f"{v} outside {lo_s or '(-inf'}, {hi_s or 'inf)'}")
            return None
        return int(v) if integer else v

    def string(self, d, key, path, *, default=_MISSING, choices=None):
        v = d.get(key, _MISSING)
        p = _join(path, key)
        if v is _MISSING:
            if default is _MISSING:
                self.err(ErrorKind.RANGE, p, "required")
            return None if default is _MISSING else default
        if not isinstance(v, str) or not v:
            self.err(ErrorKind.RANGE, p, "expected a non-empty string")
            return None
        if choices is not None and v not in choices:
            self.err(ErrorKind.RANGE, p, f"{v!r} not one of {sorted(choices)}")
            return None
        return v

    def boolean(self, d, key, path, default):
        v = d.get(key, default)
        if not isinstance(v, bool):
            self.err(ErrorKind.RANGE, _join(path, key), "expected true or false")
            return default
        return v


def _join(path, key):
    return f"{path}.{key}" if path else key


def _unique(chk, items, path, what):
    seen = set()
    for i, item in enumerate(items):
        if item is None:
            continue
        if item in seen:
            chk.err(ErrorKind.RANGE, f"{path}[{i}].id", f"duplicate {what} id {item!r}")
        seen.add(item)
    return seen


def _s(chk, d, key, path, **kw):
    return chk.num(d, key, path, **kw)


def validate_document(doc) -> tuple[list[ScenarioError], ScenarioConfig | None]:
    chk = _Checker()
    top = chk.obj(doc, "", _TOP_KEYS)
    if top is None:
        return chk.errors, None

    duration = chk.num(top, "duration", "", lo=0, lo_open=True)
    model_s = chk.string(top, "service_model", "", choices={m.value for m in ServiceModel})
    warmup = chk.num(top, "warmup_fraction", "", default=0.2, lo=0, hi=1, hi_open=True)

    # parameters first: the class set affects source validation
    params_doc = top.get("parameters", {})
    params = _parse_parameters(chk, params_doc)
    classes = params.classes if params else (0, 1, 2)

    # topology
    if "topology" in top:
        topo_doc = chk.obj(top["topology"], "topology", _TOPO_KEYS)
    else:
        topo_doc = None
        chk.err(ErrorKind.RANGE, "topology", "required")
    nodes, edge_nodes, links = [], [], []
    if topo_doc is not None:
        raw_nodes = chk.lst(topo_doc, "nodes", "topology", required=True)
        for i, n in enumerate(raw_nodes):
            if not isinstance(n, str) or not n:
                chk.err(ErrorKind.RANGE, f"topology.nodes[{i}]", "expected a non-empty string")
            elif n in nodes:
                chk.err(ErrorKind.RANGE, f"topology.nodes[{i}]", f"duplicate node {n!r}")
            else:
                nodes.append(n)
        for i, n in enumerate(chk.lst(topo_doc, "edge_nodes", "topology")):
            if n not in nodes:
                chk.err(ErrorKind.DANGLING, f"topology.edge_nodes[{i}]", f"unknown node {n!r}")
            else:
                edge_nodes.append(n)
        raw_links = chk.lst(topo_doc, "links", "topology", required=True)
        ids = []
        for i, ld in enumerate(raw_links):
            p = f"links[{i}]"
            ld = chk.obj(ld, p, _LINK_KEYS)
            if ld is None:
                ids.append(None)
                continue
            lid = chk.string(ld, "id", p)
            ids.append(lid)
            src = chk.string(ld, "src", p)
            dst = chk.string(ld, "dst", p)
            for end, key in ((src, "src"), (dst, "dst")):
                if end is not None and end not in nodes:
                    chk.err(ErrorKind.DANGLING, f"{p}.{key}", f"unknown node {end!r}")
            if src is not None and src == dst:
                chk.err(ErrorKind.RANGE, f"{p}.dst", "self-loop link")
            cap = chk.num(ld, "capacity", p, lo=1)
            prop = chk.num(ld, "propagation_delay", p, default=0.0, lo=0)
            if None not in (lid, src, dst, cap, prop) and src in nodes and dst in nodes \
                    and src != dst:
                links.append(Link(lid, src, dst, int(round(cap)), seconds_to_ns(prop)))
        _unique(chk, ids, "links", "link")
    link_ids = {l.id for l in links}
    topology = Topology(nodes, links, set(edge_nodes))

    if model_s == ServiceModel.INCENTIVE.value and topo_doc is not None and not edge_nodes:
        chk.err(ErrorKind.RANGE, "topology.edge_nodes",
                "the incentive model needs at least one edge node")

    # subscribers
    subs = []
    raw_subs = chk.lst(top, "subscribers", "")
    sub_ids = []
    for i, sd in enumerate(raw_subs):
        p = f"subscribers[{i}]"
        sd = chk.obj(sd, p, _SUB_KEYS)
        if sd is None:
            sub_ids.append(None)
            continue
        sid = chk.string(sd, "id", p)
        sub_ids.append(sid)
        nbr = chk.num(sd, "nbr", p, lo=0, lo_open=True)
        cap = chk.num(sd, "access_rate_cap", p, lo=0, lo_open=True)
        label = chk.string(sd, "price_class", p, default="")
        if nbr is not None and cap is not None and cap < nbr:
            chk.err(ErrorKind.RANGE, f"{p}.access_rate_cap", "must be >= nbr")
            cap = None
        if None not in (sid, nbr, cap, label):
            subs.append(SubscriberContract(sid, float(nbr), float(cap), label))
    sub_set = _unique(chk, sub_ids, "subscribers", "subscriber")
    sub_by_id = {s.subscriber_id: s for s in subs}

    # sources
    dur_ns = seconds_to_ns(duration) if duration is not None else None
    sources = []
    src_ids = []
    for i, sd in enumerate(chk.lst(top, "sources", "")):
        p = f"sources[{i}]"
        sd = chk.obj(sd, p, _SRC_KEYS)
        if sd is None:
            src_ids.append(None)
            continue
        spec = _parse_source(chk, sd, p, nodes, topology, sub_set, classes, model_s, edge_nodes)
        src_ids.append(sd.get("id") if isinstance(sd.get("id"), str) else None)
        if spec is not None:
            sources.append(spec)
    flow_set = _unique(chk, src_ids, "sources", "source")
    devices = {s.device for s in sources}

    # connection arrivals
    arrivals = []
    arr_ids = []
    raw_arr = chk.lst(top, "connection_arrivals", "")
    if raw_arr and model_s not in (None, ServiceModel.CONNECTION_ORIENTED.value):
        chk.err(ErrorKind.RANGE, "connection_arrivals",
                "only allowed with the connection_oriented model")
    for i, ad in enumerate(raw_arr):
        p = f"connection_arrivals[{i}]"
        ad = chk.obj(ad, p, _ARR_KEYS)
        if ad is None:
            arr_ids.append(None)
            continue
        aid = chk.string(ad, "id", p)
        arr_ids.append(aid)
        src = chk.string(ad, "src", p)
        dst = chk.string(ad, "dst", p)
        ok = _check_route(chk, p, src, dst, nodes, topology)
        rate = chk.num(ad, "arrival_rate", p, lo=0, lo_open=True)
        hold = chk.num(ad, "mean_holding", p, lo=0, lo_open=True)
        peak = chk.num(ad, "peak_rate", p, lo=0, lo_open=True)
        cls = _class(chk, ad, p, classes)
        size = chk.num(ad, "packet_size_bits", p, default=12_000, lo=1, integer=True)
        emit = chk.boolean(ad, "emit_packets", p, False)
        sub = chk.string(ad, "subscriber", p, default=None)
        if sub is not None and sub not in sub_set:
            chk.err(ErrorKind.DANGLING, f"{p}.subscriber", f"unknown subscriber {sub!r}")
        if ok and None not in (aid, rate, hold, peak, cls, size):
            arrivals.append(ConnectionArrivalSpec(aid, src, dst, float(rate), float(hold),
                                                  float(peak), cls, size, emit, sub))
    arr_set = _unique(chk, arr_ids, "connection_arrivals", "connection arrival")
    clash = arr_set & flow_set
    for c in sorted(clash):
        chk.err(ErrorKind.RANGE, "connection_arrivals", f"id {c!r} also names a source")

    # timeline
    timeline = []
    for i, td in enumerate(chk.lst(top, "timeline", "")):
        p = f"timeline[{i}]"
        td = chk.obj(td, p, _TL_KEYS)
        if td is None:
            continue
        act = _parse_action(chk, td, p, dur_ns, sub_by_id, devices, link_ids, flow_set,
                            arr_set, classes, model_s)
        if act is not None:
            timeline.append(act)

    if chk.errors or None in (duration, model_s, warmup, params):
        if not chk.errors:
            chk.err(ErrorKind.RANGE, "", "incomplete document")
        return chk.errors, None
    cfg = ScenarioConfig(
        duration=dur_ns, service_model=ServiceModel(model_s), topology=topology,
        subscribers=tuple(subs), sources=tuple(sources), connection_arrivals=tuple(arrivals),
        timeline=tuple(sorted(timeline, key=lambda a: a.at)), parameters=params,
        warmup_fraction=float(warmup), document=doc)
    return [], cfg


def _class(chk, d, p, classes, key="delay_class", default=2):
    v = chk.num(d, key, p, default=default, integer=True)
    if v is not None and v not in classes:
        chk.err(ErrorKind.RANGE, _join(p, key), f"delay class {v} not in {list(classes)}")
        return None
    return v


def _check_route(chk, p, src, dst, nodes, topology) -> bool:
    ok = True
    for end, key in ((src, "src"), (dst, "dst")):
        if end is not None and end not in nodes:
            chk.err(ErrorKind.DANGLING, f"{p}.{key}", f"unknown node {end!r}")
            ok = False
    if src is None or dst is None or not ok:
        return False
    if src == dst:
        chk.err(ErrorKind.RANGE, f"{p}.dst", "source and destination are the same node")
        return False
    if topology.route(src, dst) is None:
        chk.err(ErrorKind.DANGLING, f"{p}.dst", f"no route from {src!r} to {dst!r}")
        return False
    return True


def _parse_source(chk, sd, p, nodes, topology, sub_set, classes, model_s, edge_nodes):
    sid = chk.string(sd, "id", p)
    sub = chk.string(sd, "subscriber", p)
    if sub is not None and sub not in sub_set:
        chk.err(ErrorKind.DANGLING, f"{p}.subscriber", f"unknown subscriber {sub!r}")
        sub = None
    kind = chk.string(sd, "kind", p, choices={k.value for k in SourceKind})
    device = chk.string(sd, "device", p, default=None)
    src = chk.string(sd, "src", p)
    dst = chk.string(sd, "dst", p)
    ok = _check_route(chk, p, src, dst, nodes, topology)
    if ok and model_s == ServiceModel.INCENTIVE.value and edge_nodes and src not in edge_nodes:
        chk.err(ErrorKind.RANGE, f"{p}.src", f"{src!r} is not an edge node")
        ok = False
    size = chk.num(sd, "packet_size_bits", p, default=12_000, lo=1, integer=True)
    cls = _class(chk, sd, p, classes)
    if kind == SourceKind.MEDIA.value:
        rate = chk.num(sd, "rate", p, default=1.0, lo=0, lo_open=True)
    else:
        rate = chk.num(sd, "rate", p, lo=0, lo_open=True)
    start = chk.num(sd, "start", p, default=0.0, lo=0)
    stop = chk.num(sd, "stop", p, default=None, lo=0)
    jitter = chk.num(sd, "start_jitter", p, default=0.0, lo=0)
    if start is not None and stop is not None and stop < start:
        chk.err(ErrorKind.RANGE, f"{p}.stop", "stop precedes start")
        stop = _MISSING
    aimd = AimdParams()
    if "aimd" in sd:
        ad = chk.obj(sd["aimd"], f"{p}.aimd", _AIMD_KEYS)
        if ad is not None:
            ap = f"{p}.aimd"
            step = chk.num(ad, "additive_step", ap, default=aimd.additive_step, lo=0, lo_open=True)
            b = chk.num(ad, "decrease_factor", ap, default=aimd.decrease_factor, lo=0, hi=1,
                        lo_open=True, hi_open=True)
            rmin = chk.num(ad, "min_rate", ap, default=aimd.min_rate, lo=0, lo_open=True)
            tick = chk.num(ad, "tick", ap, default=aimd.tick / 1e9, lo=0, lo_open=True)
            if None not in (step, b, rmin, tick):
                aimd = AimdParams(float(step), float(b), float(rmin), seconds_to_ns(tick))
            else:
                aimd = None
    media = MediaParams()
    if "media" in sd:
        md = chk.obj(sd["media"], f"{p}.media", _MEDIA_KEYS)
        if md is not None:
            mp = f"{p}.media"
            rungs = md.get("rungs", list(media.rungs))
            good = isinstance(rungs, list) and rungs and all(
                isinstance(r, (int, float)) and not isinstance(r, bool) and r > 0 for r in rungs)
            if not good:
                chk.err(ErrorKind.RANGE, f"{mp}.rungs", "expected a list of positive rates")
            elif any(b <= a for a, b in zip(rungs, rungs[1:])):
                chk.err(ErrorKind.RANGE, f"{mp}.rungs", "rungs must be strictly increasing")
                good = False
            thr = chk.num(md, "loss_threshold", mp, default=media.loss_threshold, lo=0, hi=1)
            win = chk.num(md, "window", mp, default=media.window / 1e9, lo=0, lo_open=True)
            init = chk.num(md, "initial_rung", mp, default=0, lo=0, integer=True)
            if good and init is not None and init >= len(rungs):
                chk.err(ErrorKind.RANGE, f"{mp}.initial_rung", "beyond the top rung")
                init = None
            if good and None not in (thr, win, init):
                media = MediaParams(tuple(float(r) for r in rungs), float(thr),
                                    seconds_to_ns(win), init)
            else:
                media = None
    if not ok or None in (sid, sub, kind, size, cls, rate, start, jitter, aimd, media) \
            or stop is _MISSING:
        return None
    return SourceSpec(
        id=sid, subscriber_id=sub, kind=SourceKind(kind), src=src, dst=dst,
        packet_size_bits=size, delay_class=cls, rate=float(rate), start=seconds_to_ns(start),
        stop=None if stop is None else seconds_to_ns(stop), start_jitter=seconds_to_ns(jitter),
        device_id=device, aimd=aimd, media=media)


def _parse_parameters(chk, pd):
    pd = chk.obj(pd, "parameters", _PARAM_KEYS)
    if pd is None:
        return None
    p = "parameters"
    d = Parameters()
    tau = chk.num(pd, "meter_time_constant", p, default=d.meter_time_constant / 1e9,
                  lo=0, lo_open=True)
    ncls = chk.num(pd, "delay_classes", p, default=3, integer=True)
    if ncls is not None and ncls not in (2, 3):
        chk.err(ErrorKind.RANGE, f"{p}.delay_classes", "must be 2 or 3")
        ncls = None
    queue_bytes = dict(d.queue_bytes)
    if "queue_bytes" in pd:
        qd = chk.obj(pd["queue_bytes"], f"{p}.queue_bytes", {"0", "1", "2"})
        if qd is not None:
            for k in qd:
                if k in ("0", "1", "2"):
                    v = chk.num(qd, k, f"{p}.queue_bytes", lo=1, integer=True)
                    if v is not None:
                        queue_bytes[int(k)] = v
    fifo = chk.num(pd, "fifo_queue_bytes", p, default=d.fifo_queue_bytes, lo=1, integer=True)
    rtt = chk.num(pd, "feedback_rtt", p, default=d.feedback_rtt / 1e9, lo=0, lo_open=True)
    split = chk.string(pd, "nbr_split", p, default="equal", choices={"equal", "none"})
    mode = chk.string(pd, "node_mode", p, default="dynamic", choices={"dynamic", "static"})
    shares = {}
    if "static_class_shares" in pd:
        sd = chk.obj(pd["static_class_shares"], f"{p}.static_class_shares", {"0", "1", "2"})
        if sd is not None:
            for k in sd:
                if k in ("0", "1", "2"):
                    v = chk.num(sd, k, f"{p}.static_class_shares", lo=0, hi=1, lo_open=True)
                    if v is not None:
                        shares[int(k)] = float(v)
    wq = d.waiting_queue
    if "waiting_queue" in pd:
        wd = chk.obj(pd["waiting_queue"], f"{p}.waiting_queue", _WAIT_KEYS)
        if wd is not None:
            wp = f"{p}.waiting_queue"
            en = chk.boolean(wd, "enabled", wp, False)
            cap = chk.num(wd, "capacity", wp, default=wq.capacity, lo=0, integer=True)
            to = chk.num(wd, "timeout", wp, default=wq.timeout / 1e9, lo=0, lo_open=True)
            wq = WaitingQueueParams(en, cap, seconds_to_ns(to)) if None not in (cap, to) else None
    uf = chk.num(pd, "utilization_factor", p, default=1.0, lo=0, hi=1, lo_open=True)
    if None in (tau, ncls, fifo, rtt, split, mode, wq, uf):
        return None
    return Parameters(meter_time_constant=seconds_to_ns(tau), queue_bytes=queue_bytes,
                      fifo_queue_bytes=fifo, delay_classes=ncls, feedback_rtt=seconds_to_ns(rtt),
                      nbr_split=split, node_mode=mode, static_class_shares=shares,
                      waiting_queue=wq, utilization_factor=float(uf))


def _parse_action(chk, td, p, dur_ns, sub_by_id, devices, link_ids, flow_set, arr_set,
                  classes, model_s):
    at = chk.num(td, "at", p, lo=0)
    level_s = chk.string(td, "level", p, choices={l.value for l in Level})
    kind_s = chk.string(td, "kind", p, choices={k.value for k in ActionKind})
    target = chk.string(td, "target", p)
    params = td.get("params", {})
    if not isinstance(params, dict):
        chk.err(ErrorKind.RANGE, f"{p}.params", "expected an object")
        params = None
    if level_s is None or kind_s is None:
        return None
    level, kind = Level(level_s), ActionKind(kind_s)
    if ACTION_MATRIX[(level, kind)] is None:
        chk.err(ErrorKind.INVALID_ACTION, p,
                f"{level.value} x {kind.value} is a dash cell in the QoS action matrix "
                "(no such action exists)")
        return None
    ok = True
    if at is not None and dur_ns is not None and seconds_to_ns(at) >= dur_ns:
        chk.err(ErrorKind.RANGE, f"{p}.at", "action scheduled at or after the end of the run")
        ok = False
    if target is not None:
        if level is Level.SUBSCRIBER:
            known = target in sub_by_id
        elif level is Level.DEVICE:
            known = target in devices
        elif level is Level.AGGREGATE:
            lid, _, cls = target.partition(":")
            known = lid in link_ids and (not cls or (cls.isdigit() and int(cls) in classes))
        elif level is Level.CONNECTION:
            if model_s not in (None, ServiceModel.CONNECTION_ORIENTED.value):
                chk.err(ErrorKind.INVALID_ACTION, f"{p}.level",
                        "connection actions need the connection_oriented model")
                ok = False
            gen, sep, n = target.rpartition("#")
            known = target in flow_set or (sep and gen in arr_set and n.isdigit())
        else:
            known = target in flow_set
        if not known:
            chk.err(ErrorKind.DANGLING, f"{p}.target", f"unknown {level.value} {target!r}")
            ok = False
    if params is not None:
        allowed = _ACTION_PARAMS[(level, kind)]
        for k in params:
            if k not in allowed:
                chk.err(ErrorKind.UNKNOWN_KEY, f"{p}.params.{k}", "unknown key for this action")
                ok = False
        pp = f"{p}.params"
        for key in ("nbr", "access_rate_cap", "data_volume_bits", "max_rate", "peak_rate"):
            if key in params and chk.num(params, key, pp, lo=0, lo_open=True) is None:
                ok = False
        if "after" in params and chk.num(params, "after", pp, lo=0) is None:
            ok = False
        if "delay_class" in params and _class(chk, params, pp, classes) is None:
            ok = False
        if "label" in params and chk.string(params, "label", pp) is None:
            ok = False
        if "price_class" in params and chk.string(params, "price_class", pp) is None:
            ok = False
        if level is Level.SUBSCRIBER and target in sub_by_id:
            c = sub_by_id[target]
            nbr = params.get("nbr", c.nbr)
            cap = params.get("access_rate_cap", c.access_rate_cap)
            if _is_num(nbr) and _is_num(cap) and cap < nbr:
                chk.err(ErrorKind.RANGE, pp, "access_rate_cap would fall below nbr")
                ok = False
    if not ok or None in (at, target, params):
        return None
    return QosAction(level, kind, target, dict(params), seconds_to_ns(at))


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate_scenario(text: str) -> list[ScenarioError]:
    """Every error in ``text``; an empty list means the document is valid."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        return [ScenarioError(ErrorKind.SYNTAX, f"line {e.lineno} column {e.colno}", e.msg)]
    errors, _ = validate_document(doc)
    return errors


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario; raises InvalidScenario listing all errors."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidScenario(
            [ScenarioError(ErrorKind.SYNTAX, f"line {e.lineno} column {e.colno}", e.msg)]) from None
    errors, cfg = validate_document(doc)
    if errors:
        raise InvalidScenario(errors)
    return cfg


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
