"""The simulated world: sources, edge functions, output ports, admission control.

:func:`run` is the entry point. :class:`Simulation` exposes the same run
with the trace buffers kept around for the CLI.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import replace

from . import metrics
from .engine import EventQueue, RngStreams, seconds_to_ns, transmit
from .errors import InvalidContract, UnknownTarget
from .marker import (DELAY_CLASSES, FlowMeter, Packet, TokenBucket, encode_field, mark, police,
                     police_bucket)
from .node import Discipline, NodeState, Verdict, dequeue, enqueue
from .scenario import ScenarioConfig
from .servicemodels import (ActionKind, Admission, AdmissionState, ConnectionRequest, Level,
                            QosAction, ServiceModel, admit, apply_action, check_target,
                            drain_waiting, release)
from .stdmap import dscp_for_phb, export_marking
from .traffic import DropFeedback, SourceKind, SourceSpec, aimd_step, cbr_next_departure, \
    media_adapt

_REASON = {
    Verdict.DROP_PRIORITY: "priority",
    Verdict.DROP_FULL: "full",
    Verdict.DROP_LIMIT: "limit",
}

TRACE_HEADER = "time_ns,node_id,flow_id,class,priority,event\n"
MARK_HEADER = "time_ns,flow_id,packet_id,class,priority,field,dscp,up\n"


class Flow:
    """Runtime state of one traffic source (or one packet-emitting connection)."""

    def __init__(self, spec: SourceSpec, counter_id: str, contract, ports, meter: FlowMeter):
        self.spec = spec
        self.counter_id = counter_id
        self.contract = contract
        self.ports = ports
        self.meter = meter
        self.delay_class = spec.delay_class
        self.rate = spec.rate
        self.rung = spec.media.initial_rung
        if spec.kind is SourceKind.MEDIA:
            self.rate = spec.media.rungs[self.rung]
        self.gen = 0
        self.active = False
        self.killed = False
        self.drops_tick = 0
        self.last_cut = -1  # ns of the last multiplicative decrease
        self.win_sent = 0
        self.win_drops = 0
        self.packet_actions: deque = deque()
        self.peak_rate: float | None = None  # set by admission control

    @property
    def adaptive(self) -> bool:
        return self.spec.kind is not SourceKind.CBR

    def rate_cap(self) -> float:
        cap = float("inf") if self.contract is None else self.contract.access_rate_cap
        if self.peak_rate is not None:
            cap = min(cap, self.peak_rate)
        return cap


class _Connection:
    __slots__ = ("request", "links", "flow", "source_id", "queued_at")

    def __init__(self, request, links, flow, source_id):
        self.request = request
        self.links = links
        self.flow = flow
        self.source_id = source_id
        self.queued_at = None


class Simulation:
    def __init__(self, scenario: ScenarioConfig, seed: int, trace: bool = False):
        self.cfg = scenario
        self.seed = seed
        self.q = EventQueue()
        self.rng = RngStreams(seed)
        self.model = scenario.service_model
        prm = scenario.parameters
        self.classes = prm.classes
        self.rtt = prm.feedback_rtt
        self.trace = trace
        self.trace_lines: list[str] = []
        self.mark_lines: list[str] = []
        self.collector = metrics.Collector(scenario.warmup_end)

        if self.model is ServiceModel.INCENTIVE:
            disc = Discipline.STATIC if prm.node_mode == "static" else Discipline.INCENTIVE
        elif self.model is ServiceModel.BEST_EFFORT:
            disc = Discipline.FIFO
        else:
            disc = Discipline.PRIORITY
        self.ports: dict[str, NodeState] = {}
        for link in scenario.topology.links:
            port = NodeState(link.src_node, link, disc, prm.queue_bytes, self.classes,
                             prm.fifo_queue_bytes)
            if disc is Discipline.STATIC:
                self._install_static_limits(port, prm.static_class_shares)
            self.ports[link.id] = port

        self.contracts = {c.subscriber_id: replace(c) for c in scenario.subscribers}
        self.policers = {sid: police_bucket(c, self.rtt) for sid, c in self.contracts.items()}
        self.denied: set[str] = set()
        self.quota: dict[str, float] = {}
        self.disconnected: set[str] = set()
        self.device_buckets: dict[str, TokenBucket] = {}
        self.active_count: dict[str, int] = defaultdict(int)
        self.aggregate_labels: dict[str, str] = {}

        self.flows: dict[str, Flow] = {}
        for spec in scenario.sources:
            self.flows[spec.id] = self._make_flow(spec, spec.id)
            self.collector.flow(spec.id, spec.delay_class, spec.subscriber_id)

        self.admission = None
        self.connections: dict[str, _Connection] = {}
        if self.model is ServiceModel.CONNECTION_ORIENTED:
            wq = prm.waiting_queue
            self.admission = AdmissionState(
                {l.id: l.capacity for l in scenario.topology.links}, prm.utilization_factor,
                wq.enabled, wq.capacity, wq.timeout)
        self.in_transit: dict[int, Packet] = {}
        self._next_packet_id = 0
        self._ran = False

    # -- setup ---------------------------------------------------------------------

    def _install_static_limits(self, port, shares):
        weights = {c: DELAY_CLASSES[c].weight for c in self.classes}
        total = sum(weights.values())
        for c in self.classes:
            share = shares.get(c, weights[c] / total)
            rate = share * port.link.capacity
            port.class_limits[c] = TokenBucket(rate, max(rate * self.rtt / 1e9, 12_000.0))

    def _make_flow(self, spec, counter_id):
        route = self.cfg.topology.route(spec.src, spec.dst)
        ports = tuple(self.ports[l.id] for l in route)
        contract = self.contracts.get(spec.subscriber_id)
        meter = FlowMeter(spec.id, self.cfg.parameters.meter_time_constant)
        return Flow(spec, counter_id, contract, ports, meter)

    # -- run -----------------------------------------------------------------------

    def run(self) -> metrics.Report:
        if self._ran:
            raise RuntimeError("a Simulation runs once; build a new one")
        self._ran = True
        q = self.q
        for fid, flow in self.flows.items():
            start = flow.spec.start
            if flow.spec.start_jitter > 0:
                start += int(self.rng.stream(f"source:{fid}").integers(0, flow.spec.start_jitter))
            q.schedule(start, self._flow_start, flow)
        for arr in self.cfg.connection_arrivals:
            q.schedule(self._exp_ns(f"arrivals:{arr.id}", 1.0 / arr.arrival_rate),
                       self._conn_arrival, arr, 0)
        for action in self.cfg.timeline:
            q.schedule(action.at, self._run_action, action)
        q.run_until(self.cfg.duration)

        in_flight: dict[str, int] = defaultdict(int)
        for port in self.ports.values():
            for p in port.packets():
                in_flight[p.flow_id] += 1
        for p in self.in_transit.values():
            in_flight[p.flow_id] += 1
        return metrics.finalize(self.collector, in_flight, seed=self.seed,
                                scenario=self.cfg.canonical_json(),
                                duration_ns=self.cfg.duration, classes=self.classes)

    def _exp_ns(self, stream: str, mean_s: float) -> int:
        return seconds_to_ns(float(self.rng.stream(stream).exponential(mean_s)))

    def trace_text(self) -> str:
        return TRACE_HEADER + "".join(self.trace_lines)

    def marks_text(self) -> str:
        return MARK_HEADER + "".join(self.mark_lines)

    # -- sources -------------------------------------------------------------------

    def _flow_start(self, flow: Flow):
        spec = flow.spec
        if flow.killed or spec.subscriber_id in self.denied or spec.device in self.disconnected:
            flow.killed = True
            return
        if self.admission is not None:
            request = ConnectionRequest(spec.id, self._peak_of(spec), spec.delay_class,
                                        None, self.q.now, spec.id)
            conn = _Connection(request, tuple(l.link.id for l in flow.ports), flow, spec.id)
            self.connections[spec.id] = conn
            self._connect(conn)
        else:
            self._activate(flow)

    def _peak_of(self, spec: SourceSpec) -> float:
        if spec.kind is SourceKind.CBR:
            return spec.rate
        if spec.kind is SourceKind.MEDIA:
            return spec.media.rungs[-1]
        contract = self.contracts.get(spec.subscriber_id)
        return contract.access_rate_cap if contract is not None else spec.rate

    def _activate(self, flow: Flow):
        now = self.q.now
        if flow.spec.stop is not None and now >= flow.spec.stop:
            return
        flow.active = True
        flow.gen += 1
        self.active_count[flow.spec.subscriber_id] += 1
        flow.drops_tick = flow.win_sent = flow.win_drops = 0
        self.q.schedule(now, self._emit, flow, flow.gen)
        if flow.spec.kind is SourceKind.AIMD:
            self.q.schedule(now + flow.spec.aimd.tick, self._aimd_tick, flow, flow.gen)
        elif flow.spec.kind is SourceKind.MEDIA:
            self.q.schedule(now + flow.spec.media.window, self._media_window, flow, flow.gen)

    def _deactivate(self, flow: Flow, release_connection: bool = True):
        if not flow.active:
            return
        flow.active = False
        flow.gen += 1
        self.active_count[flow.spec.subscriber_id] -= 1
        if release_connection and self.admission is not None:
            conn_id = self._conn_id_of(flow)
            if conn_id in self.admission.admitted:
                self._release(conn_id)

    def _conn_id_of(self, flow):
        return flow.spec.id

    def _kill(self, flow: Flow):
        flow.killed = True
        self._deactivate(flow)
        if self.admission is not None:
            conn_id = self._conn_id_of(flow)
            if self.admission.remove_waiting(conn_id) is not None:
                self.collector.connection(self.connections[conn_id].source_id).blocked += 1

    def _flow_nbr(self, flow: Flow) -> float:
        nbr = flow.contract.nbr
        if self.cfg.parameters.nbr_split == "equal":
            return nbr / max(1, self.active_count[flow.spec.subscriber_id])
        return nbr

    def _emit(self, flow: Flow, gen: int):
        if gen != flow.gen:
            return
        spec = flow.spec
        now = self.q.now
        if spec.stop is not None and now >= spec.stop:
            self._deactivate(flow)
            return
        pid = self._next_packet_id
        self._next_packet_id += 1
        pkt = Packet(pid, flow.counter_id, spec.subscriber_id, spec.packet_size_bits,
                     flow.delay_class, now, flow.ports, flow)
        self.collector.sent(pkt)
        flow.win_sent += 1
        reason = self._edge(flow, pkt, now)
        if reason is not None:
            self._drop(pkt, reason)
        else:
            self._enqueue(flow.ports[0], pkt)
        nxt = cbr_next_departure(spec, now, min(flow.rate, flow.rate_cap()))
        if nxt is None:
            self.q.schedule(max(spec.stop, now), self._emit, flow, flow.gen)
        else:
            self.q.schedule(nxt, self._emit, flow, flow.gen)

    def _edge(self, flow: Flow, pkt: Packet, now: int) -> str | None:
        """Packet-level actions, policing and marking; returns a drop reason or None."""
        if flow.packet_actions:
            action = flow.packet_actions.popleft()
            if action.kind is ActionKind.REJECT:
                return "action"
            if action.kind is ActionKind.CHANGE_STATUS and "delay_class" in action.params:
                pkt.delay_class = int(action.params["delay_class"])
        contract = flow.contract
        if contract is not None:
            sid = flow.spec.subscriber_id
            if sid in self.denied:
                return "police"
            quota = self.quota.get(sid)
            if quota is not None and quota < pkt.size_bits:
                return "police"
            dev_bucket = self.device_buckets.get(flow.spec.device)
            if dev_bucket is not None and not dev_bucket.consume(pkt.size_bits, now):
                return "police"
            if not police(pkt, contract, self.policers[sid], now):
                return "police"
            if quota is not None:
                self.quota[sid] = quota - pkt.size_bits
            if self.model is ServiceModel.INCENTIVE:
                mark(pkt, flow.meter, contract, pkt.delay_class, now, self._flow_nbr(flow))
                self.collector.marked(pkt)
                if self.trace:
                    phb, up = export_marking(pkt.delay_class, pkt.drop_priority)
                    self.mark_lines.append(
                        f"{now},{pkt.flow_id},{pkt.id},{pkt.delay_class},{pkt.drop_priority},"
                        f"{encode_field(pkt.delay_class, pkt.drop_priority)},"
                        f"{dscp_for_phb(phb)},{up}\n")
        return None

    def _aimd_tick(self, flow: Flow, gen: int):
        if gen != flow.gen:
            return
        now = self.q.now
        fb = DropFeedback(flow.spec.id, flow.drops_tick, now)
        if flow.drops_tick:
            flow.last_cut = now
        flow.rate = aimd_step(flow.rate, fb, flow.spec, flow.rate_cap())
        flow.drops_tick = 0
        self.q.schedule(now + flow.spec.aimd.tick, self._aimd_tick, flow, gen)

    def _media_window(self, flow: Flow, gen: int):
        if gen != flow.gen:
            return
        loss = flow.win_drops / flow.win_sent if flow.win_sent else 0.0
        flow.rung = media_adapt(flow.rung, loss, flow.spec)
        flow.rate = flow.spec.media.rungs[flow.rung]
        flow.win_sent = flow.win_drops = 0
        self.q.schedule(self.q.now + flow.spec.media.window, self._media_window, flow, gen)

    def _feedback(self, flow: Flow, gen: int, sent_at: int):
        if gen != flow.gen:
            return
        flow.win_drops += 1
        # one decrease per loss event: packets sent before the last cut were
        # already answered by it
        if sent_at >= flow.last_cut:
            flow.drops_tick += 1

    # -- ports ---------------------------------------------------------------------

    def _enqueue(self, port: NodeState, pkt: Packet):
        verdict = enqueue(port, pkt, self.q.now)
        if self.trace:
            prio = "" if pkt.drop_priority is None else pkt.drop_priority
            self.trace_lines.append(f"{self.q.now},{port.node_id},{pkt.flow_id},"
                                    f"{pkt.delay_class},{prio},{verdict.value}\n")
        if verdict is Verdict.ACCEPTED:
            pkt.enqueued_at = self.q.now
            if not port.busy:
                self._start_tx(port)
        else:
            self._drop(pkt, _REASON[verdict])

    def _start_tx(self, port: NodeState):
        pkt = dequeue(port)
        if pkt is None:
            port.busy = False
            return
        now = self.q.now
        port.busy = True
        pkt.queue_wait += now - pkt.enqueued_at
        if self.trace:
            prio = "" if pkt.drop_priority is None else pkt.drop_priority
            self.trace_lines.append(f"{now},{port.node_id},{pkt.flow_id},{pkt.delay_class},"
                                    f"{prio},DEQ\n")
        self.in_transit[pkt.id] = pkt
        self.q.schedule(now + port.link.serialization_ns(pkt.size_bits), self._start_tx, port)
        self.q.schedule(transmit(port.link, pkt, now), self._arrive, pkt)

    def _arrive(self, pkt: Packet):
        del self.in_transit[pkt.id]
        pkt.hop += 1
        if pkt.hop == len(pkt.route):
            self.collector.delivered(pkt, self.q.now)
        else:
            self._enqueue(pkt.route[pkt.hop], pkt)

    def _drop(self, pkt: Packet, reason: str):
        self.collector.dropped(pkt, reason)
        flow = pkt.owner
        if flow is not None and flow.adaptive and flow.active:
            self.q.schedule(self.q.now + self.rtt, self._feedback, flow, flow.gen,
                            pkt.created_at)

    # -- connection-oriented admission ----------------------------------------------

    def _conn_arrival(self, arr, n: int):
        now = self.q.now
        self.q.schedule(now + self._exp_ns(f"arrivals:{arr.id}", 1.0 / arr.arrival_rate),
                        self._conn_arrival, arr, n + 1)
        conn_id = f"{arr.id}#{n}"
        request = ConnectionRequest(conn_id, arr.peak_rate, arr.delay_class, None, now, arr.id)
        links = tuple(l.id for l in self.cfg.topology.route(arr.src, arr.dst))
        flow = None
        if arr.emit_packets:
            spec = SourceSpec(id=conn_id, subscriber_id=arr.subscriber_id or "",
                              kind=SourceKind.CBR, src=arr.src, dst=arr.dst,
                              packet_size_bits=arr.packet_size_bits,
                              delay_class=arr.delay_class, rate=arr.peak_rate)
            flow = self._make_flow(spec, arr.id)
            self.collector.flow(arr.id, arr.delay_class, arr.subscriber_id or "")
        conn = _Connection(request, links, flow, arr.id)
        self.connections[conn_id] = conn
        self._connect(conn, holding_mean=arr.mean_holding)

    def _connect(self, conn: _Connection, holding_mean: float | None = None):
        counters = self.collector.connection(conn.source_id)
        counters.requests += 1
        if holding_mean is not None:
            conn.request.holding_time = self._exp_ns(f"holding:{conn.source_id}", holding_mean)
        verdict = admit(conn.request, self.admission, conn.links, self.q.now)
        if verdict is Admission.ADMITTED:
            counters.admitted += 1
            self._on_admitted(conn)
        elif verdict is Admission.QUEUED:
            counters.queued += 1
            self._schedule_timeout(conn)
        else:
            counters.blocked += 1
            if conn.flow is not None:
                conn.flow.killed = True

    def _schedule_timeout(self, conn):
        conn.queued_at = self.q.now
        self.q.schedule(self.q.now + self.admission.waiting_timeout, self._conn_timeout,
                        conn, conn.queued_at)

    def _on_admitted(self, conn: _Connection):
        if conn.flow is not None:
            conn.flow.peak_rate = conn.request.peak_rate
            self._activate(conn.flow)
        if conn.request.holding_time is not None:
            self.q.schedule(self.q.now + conn.request.holding_time, self._conn_end,
                            conn.request.connection_id)

    def _conn_end(self, conn_id: str):
        if conn_id not in self.admission.admitted:
            conn = self.connections.get(conn_id)
            if conn is not None and self.admission.remove_waiting(conn_id) is not None:
                conn.queued_at = None
            return
        self._release(conn_id)

    def _release(self, conn_id: str):
        conn = self.connections[conn_id]
        promoted = release(conn_id, self.admission)
        if conn.flow is not None:
            self._deactivate(conn.flow, release_connection=False)
        self._promote(promoted)

    def _promote(self, promoted):
        for request in promoted:
            conn = self.connections[request.connection_id]
            conn.queued_at = None
            self.collector.connection(conn.source_id).admitted += 1
            self._on_admitted(conn)

    def _conn_timeout(self, conn: _Connection, queued_at: int):
        if conn.queued_at != queued_at:
            return
        if self.admission.remove_waiting(conn.request.connection_id) is None:
            return
        conn.queued_at = None
        self.collector.connection(conn.source_id).blocked += 1
        if conn.flow is not None:
            conn.flow.killed = True

    # -- scripted QoS actions --------------------------------------------------------

    def _run_action(self, action: QosAction):
        try:
            outcome = apply_action(action, self)
        except (UnknownTarget, InvalidContract) as e:
            outcome = f"failed: {e}"
        self.collector.actions.append(
            (self.q.now, action.level.value, action.kind.value, action.target, outcome))

    def _sub_flows(self, sid):
        return [f for f in self.flows.values() if f.spec.subscriber_id == sid]

    def _dev_flows(self, dev):
        return [f for f in self.flows.values() if f.spec.device == dev]

    def _known_device(self, dev):
        return any(f.spec.device == dev for f in self.flows.values())

    def act_subscriber_serve_immediately(self, target, params):
        check_target(target in self.contracts, Level.SUBSCRIBER, target)
        self.denied.discard(target)
        return "access granted"

    def act_subscriber_change_status(self, target, params):
        check_target(target in self.contracts, Level.SUBSCRIBER, target)
        contract = self.contracts[target]
        if "nbr" in params:
            nbr = float(params["nbr"])
            if not 0 < nbr <= contract.access_rate_cap:
                raise InvalidContract(f"nbr {nbr} outside (0, access cap]")
            contract.nbr = nbr
        if "price_class" in params:
            contract.price_class_label = params["price_class"]
        if "delay_class" in params:
            for f in self._sub_flows(target):
                f.delay_class = int(params["delay_class"])
        return "service class changed"

    def act_subscriber_limit_size(self, target, params):
        check_target(target in self.contracts, Level.SUBSCRIBER, target)
        contract = self.contracts[target]
        now = self.q.now
        if "access_rate_cap" in params:
            cap = float(params["access_rate_cap"])
            if cap < contract.nbr:
                raise InvalidContract(f"access cap {cap} below nbr {contract.nbr}")
            contract.access_rate_cap = cap
            self.policers[target].reconfigure(cap, cap * self.rtt / 1e9, now)
        if "data_volume_bits" in params:
            self.quota[target] = float(params["data_volume_bits"])
        return "access limited"

    def act_subscriber_reject(self, target, params):
        check_target(target in self.contracts, Level.SUBSCRIBER, target)
        self.denied.add(target)
        for f in self._sub_flows(target):
            self._kill(f)
        return "access denied"

    def act_device_serve_immediately(self, target, params):
        check_target(self._known_device(target), Level.DEVICE, target)
        self.disconnected.discard(target)
        return "device connected"

    def act_device_change_status(self, target, params):
        check_target(self._known_device(target), Level.DEVICE, target)
        if "delay_class" in params:
            for f in self._dev_flows(target):
                f.delay_class = int(params["delay_class"])
        return "device priority changed"

    def act_device_limit_size(self, target, params):
        check_target(self._known_device(target), Level.DEVICE, target)
        cap = float(params["access_rate_cap"]) if "access_rate_cap" in params else None
        if cap is None:
            self.device_buckets.pop(target, None)
        else:
            self.device_buckets[target] = TokenBucket(cap, cap * self.rtt / 1e9, self.q.now)
        return "device rate limited"

    def act_device_reject(self, target, params):
        check_target(self._known_device(target), Level.DEVICE, target)
        self.disconnected.add(target)
        for f in self._dev_flows(target):
            self._kill(f)
        return "device disconnected"

    def _aggregate(self, target):
        lid, _, cls = target.partition(":")
        check_target(lid in self.ports, Level.AGGREGATE, target)
        port = self.ports[lid]
        classes = [int(cls)] if cls else list(self.classes)
        return port, classes

    def act_aggregate_serve_immediately(self, target, params):
        port, classes = self._aggregate(target)
        port.disabled_classes.difference_update(classes)
        return "path established"

    def act_aggregate_serve_later(self, target, params):
        self._aggregate(target)
        delay = seconds_to_ns(float(params.get("after", 0.0)))
        self.q.schedule(self.q.now + delay, self._run_action,
                        QosAction(Level.AGGREGATE, ActionKind.SERVE_IMMEDIATELY, target))
        return "path pre-scheduled"

    def act_aggregate_change_status(self, target, params):
        self._aggregate(target)
        self.aggregate_labels[target] = params.get("label", "")
        return "aggregate priority recorded"

    def act_aggregate_limit_size(self, target, params):
        port, classes = self._aggregate(target)
        rate = params.get("max_rate")
        if rate is None:
            for c in classes:
                port.class_limits.pop(c, None)
            return "aggregate limit removed"
        rate = float(rate)
        bucket = TokenBucket(rate, max(rate * self.rtt / 1e9, 12_000.0), self.q.now)
        for c in classes:
            port.class_limits[c] = bucket
        return "aggregate rate limited"

    def act_aggregate_reject(self, target, params):
        port, classes = self._aggregate(target)
        port.disabled_classes.update(classes)
        return "path terminated"

    def _conn(self, target) -> _Connection:
        conn = self.connections.get(target)
        check_target(conn is not None, Level.CONNECTION, target)
        return conn

    def act_connection_serve_immediately(self, target, params):
        conn = self._conn(target)
        adm = self.admission
        if target in adm.admitted:
            return "already admitted"
        if adm.is_waiting(target) and adm.fits(conn.request.peak_rate, conn.links):
            adm.remove_waiting(target)
            adm.reserve(conn.request, conn.links)
            self._promote_one(conn)
            return "admitted"
        return "not admitted: insufficient capacity"

    def _promote_one(self, conn):
        conn.queued_at = None
        self.collector.connection(conn.source_id).admitted += 1
        self._on_admitted(conn)

    def act_connection_serve_later(self, target, params):
        conn = self._conn(target)
        adm = self.admission
        if target not in adm.admitted:
            return "not admitted"
        adm.unreserve(target)
        if conn.flow is not None:
            self._deactivate(conn.flow, release_connection=False)
        adm.waiting.append((conn.request, conn.links, self.q.now))
        self.collector.connection(conn.source_id).queued += 1
        self._schedule_timeout(conn)
        self._promote(drain_waiting(adm))
        return "moved to waiting queue"

    def act_connection_change_status(self, target, params):
        conn = self._conn(target)
        if "delay_class" in params:
            conn.request.delay_class = int(params["delay_class"])
            if conn.flow is not None:
                conn.flow.delay_class = conn.request.delay_class
        return "connection priority changed"

    def act_connection_limit_size(self, target, params):
        conn = self._conn(target)
        adm = self.admission
        new_peak = float(params["peak_rate"])
        if target in adm.admitted:
            old = conn.request.peak_rate
            adm.unreserve(target)
            if not adm.fits(new_peak, conn.links):
                conn.request.peak_rate = old
                adm.reserve(conn.request, conn.links)
                return "not changed: insufficient capacity"
            conn.request.peak_rate = new_peak
            adm.reserve(conn.request, conn.links)
            if conn.flow is not None:
                conn.flow.peak_rate = new_peak
            self._promote(drain_waiting(adm))
            return "maximum rate changed"
        conn.request.peak_rate = new_peak
        return "maximum rate changed (pending)"

    def act_connection_reject(self, target, params):
        conn = self._conn(target)
        adm = self.admission
        if adm.remove_waiting(target) is not None:
            conn.queued_at = None
            self.collector.connection(conn.source_id).blocked += 1
            if conn.flow is not None:
                conn.flow.killed = True
            return "connection attempt rejected"
        if target in adm.admitted:
            self._release(target)
            if conn.flow is not None:
                conn.flow.killed = True
            return "connection terminated"
        return "nothing to reject"

    def _packet_target(self, target) -> Flow:
        flow = self.flows.get(target)
        check_target(flow is not None, Level.PACKET, target)
        return flow

    def _arm_packet_action(self, target, kind, params):
        flow = self._packet_target(target)
        flow.packet_actions.append(QosAction(Level.PACKET, kind, target, dict(params)))
        return "armed for next packet"

    def act_packet_serve_immediately(self, target, params):
        return self._arm_packet_action(target, ActionKind.SERVE_IMMEDIATELY, params)

    def act_packet_serve_later(self, target, params):
        return self._arm_packet_action(target, ActionKind.SERVE_LATER, params)

    def act_packet_change_status(self, target, params):
        return self._arm_packet_action(target, ActionKind.CHANGE_STATUS, params)

    def act_packet_reject(self, target, params):
        return self._arm_packet_action(target, ActionKind.REJECT, params)


def run(scenario: ScenarioConfig, seed: int) -> metrics.Report:
    """Simulate ``scenario`` to its end time and return the finished report."""
    return Simulation(scenario, seed).run()
