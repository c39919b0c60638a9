import itertools

import pytest

from builders import document, link_topology, source, subscriber, text
from simqos.errors import InvalidActionForLevel, UnknownConnection
from simqos.scenario import parse_scenario
from simqos.servicemodels import (ACTION_MATRIX, ActionKind, Admission, AdmissionState,
                                  ConnectionRequest, Level, QosAction, action_valid, admit,
                                  apply_action, expire_waiting, release)
from simqos.sim import Simulation

DASHES = {(Level.SUBSCRIBER, ActionKind.SERVE_LATER), (Level.DEVICE, ActionKind.SERVE_LATER),
          (Level.PACKET, ActionKind.LIMIT_SIZE)}


def test_matrix_cells():
    assert not action_valid("packet", "limit_size")
    assert not action_valid("subscriber", "serve_later")
    assert action_valid("aggregate", "serve_later")
    assert ACTION_MATRIX[(Level.AGGREGATE, ActionKind.SERVE_LATER)] == "Pre-schedule a path"
    for level, kind in itertools.product(Level, ActionKind):
        assert action_valid(level, kind) == ((level, kind) not in DASHES)


def req(cid, peak=1.0):
    return ConnectionRequest(cid, peak)


def state(cap=2.0, waiting=False):
    return AdmissionState({"l": cap}, waiting_enabled=waiting)


def test_admit_examples():
    s = state()
    assert admit(req("a"), s, ["l"]) is Admission.ADMITTED
    assert admit(req("b"), s, ["l"]) is Admission.ADMITTED
    assert admit(req("c"), s, ["l"]) is Admission.REJECTED
    s = state(waiting=True)
    admit(req("a", 2.0), s, ["l"])
    assert admit(req("b"), s, ["l"]) is Admission.QUEUED


def test_release_with_nobody_waiting():
    s = state()
    admit(req("a"), s, ["l"])
    assert release("a", s) == []
    assert s.reserved["l"] == 0


def test_release_promotions_are_head_of_line():
    s = state(cap=3.0, waiting=True)
    for cid in "abc":
        admit(req(cid), s, ["l"])
    assert admit(req("big", 2.0), s, ["l"]) is Admission.QUEUED
    assert admit(req("small", 0.5), s, ["l"]) is Admission.QUEUED
    assert release("a", s) == []  # 1 free, head needs 2, small is not skipped ahead
    assert [r.connection_id for r in release("b", s)] == ["big"]
    assert [r.connection_id for r in release("c", s)] == ["small"]


def test_release_unknown():
    with pytest.raises(UnknownConnection):
        release("nope", state())


def test_reservations_never_exceed_limit_under_utilization_factor():
    s = AdmissionState({"l": 10.0}, utilization_factor=0.5)
    results = [admit(req(str(i), 1.0), s, ["l"]) for i in range(8)]
    assert results.count(Admission.ADMITTED) == 5
    assert s.reserved["l"] == 5


def test_waiting_timeout():
    s = state(cap=1.0, waiting=True)
    admit(req("a"), s, ["l"], now=0)
    admit(req("b"), s, ["l"], now=0)
    assert expire_waiting(s, 9_999_999_999) == []
    assert [r.connection_id for r in expire_waiting(s, 10_000_000_000)] == ["b"]


def _sim(model="incentive", **kw):
    return Simulation(parse_scenario(text(document(model, **kw))), seed=1)


def test_subscriber_limit_size_updates_cap_and_policer():
    sim = _sim(subscribers=[subscriber("s", 1e6, 10e6)], sources=[source("f", "s")])
    out = apply_action(QosAction(Level.SUBSCRIBER, ActionKind.LIMIT_SIZE, "s",
                                 {"access_rate_cap": 1e6}), sim)
    assert out == "access limited"
    assert sim.contracts["s"].access_rate_cap == 1e6
    assert sim.policers["s"].rate == 1e6


def test_dash_cell_raises():
    sim = _sim(subscribers=[subscriber("s")], sources=[source("f", "s")])
    with pytest.raises(InvalidActionForLevel):
        apply_action(QosAction(Level.PACKET, ActionKind.LIMIT_SIZE, "f"), sim)


def test_connection_reject_on_pending_request_counts_as_blocked():
    doc = document(
        "connection_oriented", duration=3,
        topology=link_topology(capacity=1e6, edge=False),
        subscribers=[subscriber("s")],
        sources=[source("a", "s", rate=1e6), source("b", "s", rate=1e6, start=0.5)],
        timeline=[{"at": 1.0, "level": "connection", "kind": "reject", "target": "b"}],
        parameters={"waiting_queue": {"enabled": True}})
    report = Simulation(parse_scenario(text(doc)), 1).run()
    conns = {c.source_id: c for c in report.connections}
    assert (conns["b"].requests, conns["b"].queued, conns["b"].blocked) == (1, 1, 1)
    assert report.actions[0][-1] == "connection attempt rejected"
    assert report.flow("b").sent_packets == 0


def test_best_effort_losses_are_queue_full_only():
    doc = document("best_effort", duration=3, subscribers=[subscriber(f"s{i}") for i in range(3)],
                   sources=[source(f"f{i}", f"s{i}", rate=6e6) for i in range(3)])
    report = Simulation(parse_scenario(text(doc)), 1).run()
    for f in report.flows:
        assert f.priority_mean is None
        assert f.dropped_packets == f.drops("full")
    assert sum(f.drops("full") for f in report.flows) > 0
