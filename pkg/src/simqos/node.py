"""Output ports of core and edge nodes.

One :class:`NodeState` per outgoing link. In the incentive discipline the
port keeps one FIFO per delay class, derives an accepted-priority threshold
from the fullest queue, drops on arrival below it, and serves classes in
strict index order. The same structure also runs the best-effort (one
shared FIFO) and connection-oriented (per-class FIFOs, tail drop only)
disciplines.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .engine import Link
from .errors import UnknownClass
from .marker import TokenBucket

PA_LEVELS = 8  # accepted priority 8 rejects everything

DEFAULT_QUEUE_BYTES = {0: 16_000, 1: 64_000, 2: 512_000}


class Discipline(str, Enum):
    INCENTIVE = "incentive"
    STATIC = "static"  # per-class rate limits instead of the shared threshold
    PRIORITY = "priority"  # per-class strict priority, tail drop only
    FIFO = "fifo"  # one shared queue


class Verdict(str, Enum):
    ACCEPTED = "ENQ"
    DROP_PRIORITY = "DROP_PRI"
    DROP_FULL = "DROP_FULL"
    DROP_LIMIT = "DROP_LIMIT"


@dataclass
class ClassQueue:
    delay_class: int | None  # None for the shared best-effort FIFO
    capacity_bytes: int
    fifo: deque = field(default_factory=deque)
    occupancy_bits: int = 0

    def __post_init__(self):
        if self.capacity_bytes <= 0:
            raise ValueError("queue capacity must be > 0")

    @property
    def capacity_bits(self) -> int:
        return self.capacity_bytes * 8

    @property
    def occupancy_bytes(self) -> float:
        return self.occupancy_bits / 8

    def fits(self, packet) -> bool:
        return self.occupancy_bits + packet.size_bits <= self.capacity_bits

    def push(self, packet) -> None:
        self.fifo.append(packet)
        self.occupancy_bits += packet.size_bits

    def pop(self):
        packet = self.fifo.popleft()
        self.occupancy_bits -= packet.size_bits
        return packet

    def __len__(self):
        return len(self.fifo)


class NodeState:
    def __init__(self, node_id: str, link: Link, discipline: Discipline = Discipline.INCENTIVE,
                 queue_bytes: dict[int, int] | None = None, classes=(0, 1, 2),
                 fifo_bytes: int | None = None):
        self.node_id = node_id
        self.link = link
        self.discipline = Discipline(discipline)
        sizes = DEFAULT_QUEUE_BYTES if queue_bytes is None else queue_bytes
        if self.discipline is Discipline.FIFO:
            total = fifo_bytes if fifo_bytes is not None else sum(sizes[c] for c in classes)
            shared = ClassQueue(None, total)
            self.queues = {None: shared}
            self._class_set = frozenset(classes)
        else:
            self.queues = {c: ClassQueue(c, sizes[c]) for c in sorted(classes)}
            self._class_set = frozenset(self.queues)
        self.class_limits: dict[int, TokenBucket] = {}
        self.disabled_classes: set[int] = set()
        self.busy = False

    def queue_for(self, cls: int) -> ClassQueue:
        if cls not in self._class_set:
            raise UnknownClass(cls)
        if self.discipline is Discipline.FIFO:
            return self.queues[None]
        return self.queues[cls]

    def is_empty(self) -> bool:
        return all(not q.fifo for q in self.queues.values())

    def packets(self):
        for q in self.queues.values():
            yield from q.fifo


def accepted_priority(node: NodeState) -> int:
    """ceil(8 * max fill ratio) over the node's class queues, in [0, 8]."""
    pa = 0
    for q in node.queues.values():
        # exact integer ceiling
        level = -(-PA_LEVELS * q.occupancy_bits // q.capacity_bits)
        if level > pa:
            pa = level
    return min(max(pa, 0), PA_LEVELS)


def enqueue(node: NodeState, packet, now: int = 0) -> Verdict:
    """Admit ``packet`` to its class queue or say why it was dropped.

    Both tests run before insertion. A packet that does not fit its own
    queue is a QueueFull drop whatever its priority; otherwise it must meet
    the accepted-priority threshold.
    """
    cls = packet.delay_class
    q = node.queue_for(cls)
    if cls in node.disabled_classes:
        return Verdict.DROP_LIMIT
    if not q.fits(packet):
        return Verdict.DROP_FULL
    if node.discipline is Discipline.INCENTIVE:
        if packet.drop_priority < accepted_priority(node):
            return Verdict.DROP_PRIORITY
    bucket = node.class_limits.get(cls)
    if bucket is not None:
        bucket.refill(now)
        if bucket.tokens < packet.size_bits:
            return Verdict.DROP_LIMIT
    if bucket is not None:
        bucket.tokens -= packet.size_bits
    q.push(packet)
    return Verdict.ACCEPTED


def dequeue(node: NodeState):
    """Head of the lowest-index non-empty class queue, or None."""
    for q in node.queues.values():
        if q.fifo:
            return q.pop()
    return None
