import csv
import io
from collections import defaultdict

import pytest

from builders import document, link_topology, source, subscriber, text
from simqos import parse_scenario, run
from simqos.cli import simulate
from simqos.sim import Simulation


def cfg(**kw):
    return parse_scenario(text(document(**kw)))


def test_empty_scenario():
    r = run(cfg(duration=10), 1)
    assert r.sent_packets == 0 and r.delivered_packets == 0


def test_uncongested_cbr_is_lossless():
    r = run(cfg(duration=10, subscribers=[subscriber("s", 1e6, 10e6)],
                sources=[source("f", "s", rate=1e6)]), 1)
    f = r.flow("f")
    assert f.dropped_packets == 0
    assert f.delivered_bits + f.in_flight * 12_000 == f.sent_bits
    # 12 000-bit packets every 12 ms for 10 s
    assert f.sent_packets == 834
    assert f.goodput_bps == pytest.approx(1e6, rel=0.01)


def test_same_seed_same_bytes():
    doc = text(document(duration=3, subscribers=[subscriber("s")],
                        sources=[source("f", "s", kind="aimd", start_jitter=0.5),
                                 source("g", "s", kind="media", cls=1, start_jitter=0.5)]))
    a = simulate(doc, 42, trace=True)
    assert a == simulate(doc, 42, trace=True)
    assert a != simulate(doc, 43, trace=True)


def _trace_rows(sim):
    return list(csv.DictReader(io.StringIO(sim.trace_text())))


def _busy_sim():
    subs = [subscriber(f"s{i}") for i in range(3)]
    srcs = [source(f"f{i}", f"s{i}", kind="aimd", cls=i, rate=4e6, start_jitter=0.05)
            for i in range(3)]
    sim = Simulation(cfg(duration=4, subscribers=subs, sources=srcs), 5, trace=True)
    report = sim.run()
    return sim, report


def test_no_reordering_within_a_flow():
    sim, _ = _busy_sim()
    # a flow's departures from the only node leave in enqueue order
    rows = _trace_rows(sim)
    assert rows
    order = defaultdict(list)
    for r in rows:
        order[(r["flow_id"], r["event"])].append(int(r["time_ns"]))
    for key, times in order.items():
        assert times == sorted(times)


def test_work_conservation():
    sim, _ = _busy_sim()
    service = sim.cfg.topology.links[0].serialization_ns(12_000)
    backlog, busy_until, ready = 0, 0, None
    for r in _trace_rows(sim):
        t, ev = int(r["time_ns"]), r["event"]
        if ev == "ENQ":
            if backlog == 0:
                ready = max(t, busy_until)
            backlog += 1
        elif ev == "DEQ":
            # service starts the moment both a packet and the link are available
            assert t == ready
            backlog -= 1
            busy_until = t + service
            ready = busy_until if backlog else None


def test_aimd_rate_stays_in_bounds_and_emissions_stop():
    doc = document(duration=4, subscribers=[subscriber("s", 1e6, 3e6)],
                   sources=[source("f", "s", kind="aimd", rate=0.5e6, stop=2.5)])
    sim = Simulation(parse_scenario(text(doc)), 1, trace=True)
    sim.run()
    flow = sim.flows["f"]
    assert 16e3 <= flow.rate <= 3e6
    marks = list(csv.DictReader(io.StringIO(sim.marks_text())))
    assert max(int(m["time_ns"]) for m in marks) < 2_500_000_000


def test_marks_trace_fields_agree():
    sim, _ = _busy_sim()
    from simqos.marker import decode_field
    from simqos.stdmap import dscp_for_phb, export_marking
    for m in list(csv.DictReader(io.StringIO(sim.marks_text())))[:500]:
        cls, prio = int(m["class"]), int(m["priority"])
        assert decode_field(int(m["field"])) == (cls, prio)
        phb, up = export_marking(cls, prio)
        assert (int(m["dscp"]), int(m["up"])) == (dscp_for_phb(phb), up)


def test_packet_reject_drops_exactly_one_packet():
    doc = document(duration=2, subscribers=[subscriber("s")], sources=[source("f", "s")],
                   timeline=[{"at": 1.0, "level": "packet", "kind": "reject", "target": "f"}])
    r = run(parse_scenario(text(doc)), 1)
    assert r.flow("f").drops("action") == 1
    assert r.actions[0][1:] == ("packet", "reject", "f", "armed for next packet")


def test_subscriber_reject_stops_traffic():
    doc = document(duration=4, subscribers=[subscriber("s")], sources=[source("f", "s")],
                   timeline=[{"at": 1.0, "level": "subscriber", "kind": "reject", "target": "s"}])
    r = run(parse_scenario(text(doc)), 1)
    f = r.flow("f")
    assert f.sent_packets == pytest.approx(1e6 / 12_000, abs=2)


def test_aggregate_reject_then_reestablish():
    doc = document(duration=4, subscribers=[subscriber("s")], sources=[source("f", "s")],
                   timeline=[{"at": 1.0, "level": "aggregate", "kind": "reject", "target": "l:2"},
                             {"at": 2.0, "level": "aggregate", "kind": "serve_immediately",
                              "target": "l"}])
    r = run(parse_scenario(text(doc)), 1)
    limited = r.flow("f").drops("limit")
    assert limited == pytest.approx(1e6 / 12_000, abs=2)


def test_aggregate_serve_later_schedules_establishment():
    doc = document(duration=3, subscribers=[subscriber("s")], sources=[source("f", "s")],
                   timeline=[{"at": 0.5, "level": "aggregate", "kind": "reject", "target": "l"},
                             {"at": 1.0, "level": "aggregate", "kind": "serve_later",
                              "target": "l", "params": {"after": 0.5}}])
    r = run(parse_scenario(text(doc)), 1)
    assert [a[0] for a in r.actions] == [500_000_000, 1_000_000_000, 1_500_000_000]
    assert r.flow("f").drops("limit") == pytest.approx(1e6 / 12_000, abs=2)


def test_subscriber_quota():
    doc = document(duration=3, subscribers=[subscriber("s")], sources=[source("f", "s")],
                   timeline=[{"at": 0.0, "level": "subscriber", "kind": "limit_size",
                              "target": "s", "params": {"data_volume_bits": 120_000}}])
    r = run(parse_scenario(text(doc)), 1)
    assert r.flow("f").delivered_packets == 10


def test_device_change_status_moves_class():
    doc = document(duration=2, subscribers=[subscriber("s")],
                   sources=[source("f", "s", device="phone")],
                   timeline=[{"at": 1.0, "level": "device", "kind": "change_status",
                              "target": "phone", "params": {"delay_class": 0}}])
    r = run(parse_scenario(text(doc)), 1)
    assert r.class_summary(0).goodput_bps > 0 and r.class_summary(2).goodput_bps > 0


def test_unknown_runtime_target_is_reported_not_fatal():
    doc = document("connection_oriented", duration=2, topology=link_topology(edge=False),
                   subscribers=[subscriber("s")], sources=[source("f", "s")],
                   timeline=[{"at": 1.0, "level": "connection", "kind": "reject",
                              "target": "f"}])
    r = run(parse_scenario(text(doc)), 1)
    assert r.actions[0][-1] == "connection terminated"


def test_connection_model_blocks_beyond_capacity():
    doc = document("connection_oriented", duration=2,
                   topology=link_topology(capacity=2.5e6, edge=False),
                   subscribers=[subscriber("s")],
                   sources=[source(f"f{i}", "s", rate=1e6) for i in range(3)])
    r = run(parse_scenario(text(doc)), 1)
    assert sum(c.blocked for c in r.connections) == 1
    assert sum(f.sent_packets > 0 for f in r.flows) == 2
    assert all(f.dropped_packets == 0 for f in r.flows)


def test_two_class_mode():
    doc = document(duration=2, subscribers=[subscriber("s")],
                   sources=[source("f", "s", cls=0), source("g", "s", cls=2)],
                   parameters={"delay_classes": 2})
    r = run(parse_scenario(text(doc)), 1)
    assert [c.delay_class for c in r.classes] == [0, 2]
    bad = document(duration=2, subscribers=[subscriber("s")], sources=[source("f", "s", cls=1)],
                   parameters={"delay_classes": 2})
    with pytest.raises(Exception):
        parse_scenario(text(bad))


def test_static_mode_limits_each_class():
    doc = document(duration=5, subscribers=[subscriber("s", 1e6, 20e6)],
                   sources=[source("f", "s", rate=15e6, cls=2)],
                   parameters={"node_mode": "static", "static_class_shares": {"2": 0.5}})
    r = run(parse_scenario(text(doc)), 1)
    assert r.flow("f").goodput_bps == pytest.approx(5e6, rel=0.02)
    assert r.flow("f").drops("limit") > 0
