"""Service-process models and the level x action QoS matrix.

Three models are selectable per scenario:

* connection-oriented: peak-rate admission control with an optional
  head-of-line FIFO waiting queue;
* best effort: no admission, no marking, one tail-drop FIFO per link;
* incentive-based: no admission; all differentiation comes from edge
  marking and the core's accepted-priority threshold.

``apply_action`` executes one matrix cell against a running simulation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from types import MappingProxyType

from .errors import InvalidActionForLevel, UnknownConnection, UnknownTarget


class ServiceModel(str, Enum):
    CONNECTION_ORIENTED = "connection_oriented"
    BEST_EFFORT = "best_effort"
    INCENTIVE = "incentive"


class Level(str, Enum):
    SUBSCRIBER = "subscriber"
    DEVICE = "device"
    AGGREGATE = "aggregate"
    CONNECTION = "connection"
    PACKET = "packet"


class ActionKind(str, Enum):
    SERVE_IMMEDIATELY = "serve_immediately"
    SERVE_LATER = "serve_later"
    CHANGE_STATUS = "change_status"
    LIMIT_SIZE = "limit_size"
    REJECT = "reject"


_L, _K = Level, ActionKind
# None marks a combination that has no meaning
ACTION_MATRIX = MappingProxyType({
    (_L.SUBSCRIBER, _K.SERVE_IMMEDIATELY): "Accept SIM",
    (_L.SUBSCRIBER, _K.SERVE_LATER): None,
    (_L.SUBSCRIBER, _K.CHANGE_STATUS): "Change service class",
    (_L.SUBSCRIBER, _K.LIMIT_SIZE): "Change access rate or data volume",
    (_L.SUBSCRIBER, _K.REJECT): "Deny access right",
    (_L.DEVICE, _K.SERVE_IMMEDIATELY): "Connect device",
    (_L.DEVICE, _K.SERVE_LATER): None,
    (_L.DEVICE, _K.CHANGE_STATUS): "Change priority",
    (_L.DEVICE, _K.LIMIT_SIZE): "Change access rate",
    (_L.DEVICE, _K.REJECT): "Disconnect device",
    (_L.AGGREGATE, _K.SERVE_IMMEDIATELY): "Establish a path",
    (_L.AGGREGATE, _K.SERVE_LATER): "Pre-schedule a path",
    (_L.AGGREGATE, _K.CHANGE_STATUS): "Change priority",
    (_L.AGGREGATE, _K.LIMIT_SIZE): "Change maximum rate",
    (_L.AGGREGATE, _K.REJECT): "Terminate a path",
    (_L.CONNECTION, _K.SERVE_IMMEDIATELY): "Accept a connection",
    (_L.CONNECTION, _K.SERVE_LATER): "Put a connection in waiting queue",
    (_L.CONNECTION, _K.CHANGE_STATUS): "Change priority",
    (_L.CONNECTION, _K.LIMIT_SIZE): "Change maximum rate",
    (_L.CONNECTION, _K.REJECT): "Reject a connection attempt",
    (_L.PACKET, _K.SERVE_IMMEDIATELY): "Transmit packet",
    (_L.PACKET, _K.SERVE_LATER): "Put packet in a queue",
    (_L.PACKET, _K.CHANGE_STATUS): "Change type of service marking",
    (_L.PACKET, _K.LIMIT_SIZE): None,
    (_L.PACKET, _K.REJECT): "Drop packet",
})


def action_valid(level, kind) -> bool:
    return ACTION_MATRIX[(Level(level), ActionKind(kind))] is not None


@dataclass(frozen=True)
class QosAction:
    level: Level
    kind: ActionKind
    target: str
    params: dict = field(default_factory=dict, compare=False, hash=False)
    at: int = 0  # ns


# -- connection admission ----------------------------------------------------

class Admission(str, Enum):
    ADMITTED = "admitted"
    QUEUED = "queued"
    REJECTED = "rejected"


@dataclass
class ConnectionRequest:
    connection_id: str
    peak_rate: float
    delay_class: int = 2
    holding_time: int | None = None  # ns; None = open-ended
    arrival: int = 0
    source_id: str = ""

    def __post_init__(self):
        if not self.peak_rate > 0:
            raise ValueError(f"connection {self.connection_id}: peak rate must be > 0")


class AdmissionState:
    """Peak-rate reservations on a set of links plus one FIFO waiting queue.

    Reservations are exact rationals so admitted sums never drift.
    """

    def __init__(self, capacities: dict[str, float], utilization_factor: float = 1.0,
                 waiting_enabled: bool = False, waiting_capacity: int = 16,
                 waiting_timeout: int = 10_000_000_000):
        if not 0 < utilization_factor <= 1:
            raise ValueError("utilization factor must be in (0, 1]")
        self.limits = {k: Fraction(v) * Fraction(utilization_factor) for k, v in capacities.items()}
        self.utilization_factor = utilization_factor
        self.reserved = {k: Fraction(0) for k in capacities}
        self.admitted: dict[str, tuple[ConnectionRequest, tuple[str, ...]]] = {}
        self.waiting: deque[tuple[ConnectionRequest, tuple[str, ...], int]] = deque()
        self.waiting_enabled = waiting_enabled
        self.waiting_capacity = waiting_capacity
        self.waiting_timeout = waiting_timeout

    def fits(self, peak_rate: float, links) -> bool:
        p = Fraction(peak_rate)
        return all(self.reserved[l] + p <= self.limits[l] for l in links)

    def reserve(self, request: ConnectionRequest, links) -> None:
        p = Fraction(request.peak_rate)
        for l in links:
            self.reserved[l] += p
        self.admitted[request.connection_id] = (request, tuple(links))

    def unreserve(self, connection_id: str) -> ConnectionRequest:
        try:
            request, links = self.admitted.pop(connection_id)
        except KeyError:
            raise UnknownConnection(connection_id) from None
        p = Fraction(request.peak_rate)
        for l in links:
            self.reserved[l] -= p
        return request

    def is_waiting(self, connection_id: str) -> bool:
        return any(r.connection_id == connection_id for r, _, _ in self.waiting)

    def remove_waiting(self, connection_id: str) -> ConnectionRequest | None:
        for i, (r, _, _) in enumerate(self.waiting):
            if r.connection_id == connection_id:
                del self.waiting[i]
                return r
        return None


def admit(request: ConnectionRequest, state: AdmissionState, links, now: int = 0) -> Admission:
    """Reserve the peak rate on every link, else queue (if enabled and room), else reject.

    A newcomer never overtakes requests already waiting.
    """
    links = tuple(links) if not isinstance(links, str) else (links,)
    if not state.waiting and state.fits(request.peak_rate, links):
        state.reserve(request, links)
        return Admission.ADMITTED
    if state.waiting_enabled and len(state.waiting) < state.waiting_capacity:
        state.waiting.append((request, links, now))
        return Admission.QUEUED
    return Admission.REJECTED


def release(connection_id: str, state: AdmissionState) -> list[ConnectionRequest]:
    """Drop a reservation and promote waiting requests while the FIFO head fits."""
    state.unreserve(connection_id)
    return drain_waiting(state)


def drain_waiting(state: AdmissionState) -> list[ConnectionRequest]:
    promoted = []
    while state.waiting:
        request, links, _ = state.waiting[0]
        if not state.fits(request.peak_rate, links):
            break  # head-of-line: never skip the head
        state.waiting.popleft()
        state.reserve(request, links)
        promoted.append(request)
    return promoted


def expire_waiting(state: AdmissionState, now: int) -> list[ConnectionRequest]:
    """Remove and return waiting requests older than the waiting timeout."""
    expired = [r for r, _, t in state.waiting if now - t >= state.waiting_timeout]
    if expired:
        state.waiting = deque(e for e in state.waiting if now - e[2] < state.waiting_timeout)
    return expired


# -- action execution ----------------------------------------------------------

def apply_action(action: QosAction, sim) -> str:
    """Run one matrix cell against ``sim`` at its current time; returns an outcome tag.

    ``sim`` is a :class:`simqos.sim.Simulation`; each cell maps onto one of
    its ``act_*`` hooks.
    """
    if not action_valid(action.level, action.kind):
        raise InvalidActionForLevel(
            f"{action.level.value} x {action.kind.value} is not a valid QoS action")
    handler = getattr(sim, f"act_{action.level.value}_{action.kind.value}")
    return handler(action.target, action.params)


def check_target(exists: bool, level: Level, target: str) -> None:
    if not exists:
        raise UnknownTarget(f"{level.value} target {target!r} does not exist")
