"""Discrete-event kernel: integer-nanosecond clock, event queue, links, RNG substreams.

Time is always an ``int`` number of nanoseconds since simulation start.
Simultaneous events are dispatched in insertion order.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InternalEventOrderViolation

NS_PER_S = 1_000_000_000


def seconds_to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def ns_to_seconds(ns: int) -> float:
    return ns / NS_PER_S


@dataclass(frozen=True)
class Link:
    id: str
    src_node: str
    dst_node: str
    capacity: int  # bits per second
    propagation_delay: int = 0  # ns

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError(f"link {self.id}: capacity must be > 0")
        if self.propagation_delay < 0:
            raise ValueError(f"link {self.id}: propagation delay must be >= 0")

    def serialization_ns(self, size_bits: int) -> int:
        # ceiling: a link never transmits faster than its capacity
        return -(-size_bits * NS_PER_S // self.capacity)


def transmit(link: Link, packet, now: int) -> int:
    """Arrival time at ``link.dst_node`` of a packet whose first bit leaves at ``now``.

    ``packet`` only needs a ``size_bits`` attribute.
    """
    return now + link.serialization_ns(packet.size_bits) + link.propagation_delay


@dataclass
class Topology:
    nodes: list[str]
    links: list[Link]
    edge_nodes: set[str] = field(default_factory=set)

    def __post_init__(self):
        known = set(self.nodes)
        for link in self.links:
            if link.src_node not in known or link.dst_node not in known:
                raise ValueError(f"link {link.id} has an endpoint outside the topology")
        self._out: dict[str, list[Link]] = {n: [] for n in self.nodes}
        for link in self.links:
            self._out[link.src_node].append(link)

    def route(self, src: str, dst: str) -> list[Link] | None:
        """Fewest-hop path as a list of links; ties go to the earlier-declared link."""
        if src == dst:
            return []
        parent: dict[str, Link] = {}
        frontier = [src]
        seen = {src}
        while frontier:
            nxt = []
            for node in frontier:
                for link in self._out[node]:
                    if link.dst_node in seen:
                        continue
                    seen.add(link.dst_node)
                    parent[link.dst_node] = link
                    if link.dst_node == dst:
                        path = []
                        cur = dst
                        while cur != src:
                            path.append(parent[cur])
                            cur = parent[cur].src_node
                        return path[::-1]
                    nxt.append(link.dst_node)
            frontier = nxt
        return None


class RngStreams:
    """Named, independent random substreams derived from one 64-bit seed.

    Each name maps to its own Philox key, so adding a source never shifts
    the draws seen by any other source.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            digest = hashlib.sha256(name.encode("utf-8")).digest()
            words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=words)
            gen = np.random.Generator(np.random.Philox(seq))
            self._streams[name] = gen
        return gen


class EventQueue:
    """Min-heap of ``(time, seq, callback, args)``; seq makes ordering total."""

    def __init__(self):
        self.now = 0
        self._heap: list[tuple[int, int, Callable[..., Any], tuple]] = []
        self._seq = itertools.count()
        self.dispatched = 0

    def schedule(self, at: int, callback: Callable[..., Any], *args) -> None:
        if at < self.now:
            raise InternalEventOrderViolation(
                f"event scheduled at {at} ns while clock is at {self.now} ns")
        heapq.heappush(self._heap, (at, next(self._seq), callback, args))

    def schedule_in(self, delay: int, callback: Callable[..., Any], *args) -> None:
        self.schedule(self.now + delay, callback, *args)

    def run_until(self, end: int) -> None:
        """Dispatch every event with time < ``end``; later events stay queued."""
        heap = self._heap
        while heap and heap[0][0] < end:
            at, _, callback, args = heapq.heappop(heap)
            if at < self.now:
                raise InternalEventOrderViolation(
                    f"clock would move backward from {self.now} to {at}")
            self.now = at
            self.dispatched += 1
            callback(*args)
        self.now = max(self.now, end)

    def pending(self):
        return [(at, cb, args) for at, _, cb, args in sorted(self._heap)]

    def __len__(self):
        return len(self._heap)
