"""Subscriber contracts and traffic sources (constant rate, AIMD, adaptive media ladder)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .engine import NS_PER_S


@dataclass
class SubscriberContract:
    subscriber_id: str
    nbr: float  # nominal bit rate, bits/s
    access_rate_cap: float  # bits/s
    price_class_label: str = ""

    def __post_init__(self):
        if not self.nbr > 0:
            raise ValueError(f"subscriber {self.subscriber_id}: NBR must be > 0")
        if self.access_rate_cap < self.nbr:
            raise ValueError(f"subscriber {self.subscriber_id}: access cap below NBR")


class SourceKind(str, Enum):
    CBR = "cbr"
    AIMD = "aimd"
    MEDIA = "media"


@dataclass(frozen=True)
class AimdParams:
    additive_step: float = 50_000.0  # bits/s added per tick
    decrease_factor: float = 0.5
    min_rate: float = 16_000.0
    tick: int = 20_000_000  # ns

    def __post_init__(self):
        if not 0 < self.decrease_factor < 1:
            raise ValueError("AIMD decrease factor must be in (0, 1)")
        if self.additive_step <= 0 or self.min_rate <= 0 or self.tick <= 0:
            raise ValueError("AIMD step, floor and tick must be > 0")


@dataclass(frozen=True)
class MediaParams:
    rungs: tuple[float, ...] = (500_000.0, 1_000_000.0, 2_000_000.0, 4_000_000.0, 8_000_000.0)
    loss_threshold: float = 0.02
    window: int = 1_000_000_000  # ns
    initial_rung: int = 0

    def __post_init__(self):
        if not self.rungs or any(r <= 0 for r in self.rungs):
            raise ValueError("media rungs must be positive")
        if any(b <= a for a, b in zip(self.rungs, self.rungs[1:])):
            raise ValueError("media rungs must be strictly increasing")
        if not 0 <= self.initial_rung < len(self.rungs):
            raise ValueError("initial rung out of range")


@dataclass(frozen=True)
class SourceSpec:
    id: str
    subscriber_id: str
    kind: SourceKind
    src: str
    dst: str
    packet_size_bits: int = 12_000
    delay_class: int = 2
    rate: float = 1_000_000.0  # CBR rate, or AIMD initial rate
    start: int = 0  # ns
    stop: int | None = None  # ns, exclusive
    start_jitter: int = 0  # ns; actual start is start + U[0, jitter)
    device_id: str | None = None
    aimd: AimdParams = field(default_factory=AimdParams)
    media: MediaParams = field(default_factory=MediaParams)

    def __post_init__(self):
        if self.packet_size_bits <= 0:
            raise ValueError(f"source {self.id}: packet size must be > 0")
        if not self.rate > 0:
            raise ValueError(f"source {self.id}: rate must be > 0")
        if self.stop is not None and self.stop < self.start:
            raise ValueError(f"source {self.id}: stop before start")

    @property
    def device(self) -> str:
        return self.device_id if self.device_id is not None else self.subscriber_id


@dataclass
class DropFeedback:
    flow_id: str
    drops_in_window: int
    window_end: int

    def __post_init__(self):
        if self.drops_in_window < 0:
            raise ValueError("drop count must be >= 0")


def cbr_next_departure(spec: SourceSpec, now: int, rate: float | None = None) -> int | None:
    """Next emission time for a constant-rate source, or None once the source has ended."""
    if spec.stop is not None and now >= spec.stop:
        return None
    r = spec.rate if rate is None else rate
    nxt = now + max(1, int(round(spec.packet_size_bits * NS_PER_S / r)))
    if spec.stop is not None and nxt >= spec.stop:
        return None
    return nxt


def aimd_step(current_rate: float, feedback: DropFeedback, spec: SourceSpec,
              access_rate_cap: float) -> float:
    p = spec.aimd
    if feedback.drops_in_window > 0:
        return max(current_rate * p.decrease_factor, p.min_rate)
    return min(current_rate + p.additive_step, access_rate_cap)


def aimd_ticks_to_cap(r0: float, cap: float, step: float) -> int:
    """Ticks needed to climb from ``r0`` to ``cap`` with no drops."""
    return max(0, math.ceil((cap - r0) / step))


def media_adapt(rung: int, loss_ratio: float, spec: SourceSpec) -> int:
    """Step down on loss above threshold, up after a loss-free window, else hold."""
    m = spec.media
    if not 0 <= rung < len(m.rungs):
        raise ValueError(f"rung index out of range: {rung}")
    if loss_ratio > m.loss_threshold:
        return max(rung - 1, 0)
    if loss_ratio == 0:
        return min(rung + 1, len(m.rungs) - 1)
    return rung
