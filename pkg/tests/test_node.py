import pytest

from simqos.engine import Link
from simqos.errors import UnknownClass
from simqos.marker import Packet, TokenBucket
from simqos.node import Discipline, NodeState, Verdict, accepted_priority, dequeue, enqueue

LINK = Link("l", "a", "b", 10_000_000)


def pkt(cls=2, prio=7, size=8_000, pid=0):
    p = Packet(pid, "f", "s", size, cls, 0)
    p.drop_priority = prio
    return p


def node(**kw):
    kw.setdefault("queue_bytes", {0: 1_000, 1: 1_000, 2: 1_000})
    return NodeState("a", LINK, **kw)


def fill(n, cls, bits):
    q = n.queue_for(cls)
    while bits >= 8:
        q.push(pkt(cls, size=8))
        bits -= 8


def test_pa_empty_full_half():
    n = node()
    assert accepted_priority(n) == 0
    fill(n, 1, 4_000)
    assert accepted_priority(n) == 4
    fill(n, 2, 8_000)
    assert accepted_priority(n) == 8


def test_pa_is_a_ceiling():
    n = node()
    fill(n, 0, 8)  # one byte out of 1000
    assert accepted_priority(n) == 1


def test_enqueue_examples():
    n = node()
    assert enqueue(n, pkt(prio=7)) is Verdict.ACCEPTED
    n = node()
    fill(n, 0, 4_000)
    assert enqueue(n, pkt(cls=2, prio=3)) is Verdict.DROP_PRIORITY
    assert enqueue(n, pkt(cls=2, prio=4)) is Verdict.ACCEPTED
    n = node(discipline=Discipline.PRIORITY)
    fill(n, 2, 8_000)
    assert enqueue(n, pkt(cls=2, prio=7, size=8)) is Verdict.DROP_FULL


def test_full_queue_beats_top_priority_under_incentive_too():
    n = node(queue_bytes={0: 1_000, 1: 1_000, 2: 1_000})
    fill(n, 2, 7_992)
    assert enqueue(n, pkt(cls=2, prio=7, size=16)) is Verdict.DROP_FULL


def test_strict_priority_dequeue_and_fifo_within_class():
    n = node()
    assert dequeue(n) is None
    enqueue(n, pkt(2, pid=1))
    assert dequeue(n).id == 1
    for i, cls in enumerate([2, 0, 2, 0]):
        n.queue_for(cls).push(pkt(cls, pid=i))
    assert [dequeue(n).id for _ in range(4)] == [1, 3, 0, 2]


def test_fifo_discipline_ignores_priority_and_class():
    n = NodeState("a", LINK, Discipline.FIFO, fifo_bytes=2_000)
    fill(n, 0, 15_000)
    assert enqueue(n, pkt(cls=2, prio=0, size=8)) is Verdict.ACCEPTED
    assert enqueue(n, pkt(cls=0, prio=7, size=1_000)) is Verdict.DROP_FULL


def test_static_limit_bucket():
    n = node(discipline=Discipline.STATIC, queue_bytes={0: 1, 1: 1, 2: 10_000})
    n.class_limits[2] = TokenBucket(1_000, 10_000)
    assert enqueue(n, pkt(size=8_000)) is Verdict.ACCEPTED
    assert enqueue(n, pkt(size=8_000)) is Verdict.DROP_LIMIT


def test_unknown_class():
    n = node(classes=(0, 2))
    with pytest.raises(UnknownClass):
        enqueue(n, pkt(cls=1))
