import json

import pytest

from builders import document, source, subscriber, text
from simqos import stdmap
from simqos.cli import main, parse_seeds


@pytest.fixture
def scenario(tmp_path):
    doc = document(duration=2, subscribers=[subscriber("s")],
                   sources=[source("f", "s", rate=2e6), source("g", "s", cls=0, rate=0.1e6)])
    path = tmp_path / "scenario.json"
    path.write_text(text(doc))
    return path


def test_parse_seeds():
    assert parse_seeds("42") == [42]
    assert parse_seeds("1..3") == [1, 2, 3]
    assert parse_seeds("1,3,7") == [1, 3, 7]


def test_run_writes_deterministic_csvs(scenario, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(scenario), "--seed", "42", "--out", str(a)]) == 0
    assert main(["run", str(scenario), "--seed", "42", "--out", str(b)]) == 0
    for name in ("flows.csv", "classes.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "flows.csv").read_text().splitlines()[0]
    assert header.startswith("flow_id,class,priority_mean,sent_bits")


def test_run_refuses_non_empty_dir_without_force(scenario, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(scenario), "--seed", "1", "--out", str(out)]) == 0
    assert main(["run", str(scenario), "--seed", "1", "--out", str(out)]) == 2
    assert main(["run", str(scenario), "--seed", "1", "--out", str(out), "--force"]) == 0


def test_seed_range_and_trace(scenario, tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(scenario), "--seed", "1..2", "--out", str(out), "--trace",
                 "--jobs", "2"]) == 0
    for seed in (1, 2):
        d = out / f"seed-{seed}"
        trace = (d / "trace.csv").read_text().splitlines()
        assert trace[0] == "time_ns,node_id,flow_id,class,priority,event"
        assert {line.rsplit(",", 1)[1] for line in trace[1:]} <= {
            "ENQ", "DEQ", "DROP_PRI", "DROP_FULL", "DROP_LIMIT"}
        assert (d / "marks.csv").read_text().startswith("time_ns,flow_id,packet_id")


def test_env_var_sets_output_dir(scenario, tmp_path, monkeypatch):
    monkeypatch.setenv("SIMQOS_OUT", str(tmp_path / "env"))
    assert main(["run", str(scenario), "--seed", "3"]) == 0
    assert (tmp_path / "env" / "flows.csv").exists()


def test_validate_exit_codes(scenario, tmp_path, capsys):
    assert main(["validate", str(scenario)]) == 0
    bad = tmp_path / "bad.json"
    doc = json.loads(scenario.read_text())
    doc["timeline"] = [{"at": 1, "level": "subscriber", "kind": "serve_later", "target": "s"}]
    bad.write_text(json.dumps(doc))
    assert main(["validate", str(bad)]) == 1
    assert "InvalidAction" in capsys.readouterr().err
    assert main(["run", str(bad), "--seed", "1", "--out", str(tmp_path / "x")]) == 1


def test_map_csv(capsys):
    assert main(["map", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert out == stdmap.table_csv(stdmap.qci_table())
    assert len(out.splitlines()) == 10


def test_map_primary_override(capsys):
    assert main(["map", "--primary", "1,5"]) == 0
    rows = [l.split(",") for l in capsys.readouterr().out.splitlines()[1:]]
    assert [r[2] for r in rows if r[-1] == "1"] == ["1", "5"]
    assert main(["map", "--primary", "x"]) == 1
