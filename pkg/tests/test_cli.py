import json

import pytest

from capalloc import cli
from capalloc.model import Allocation


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def files(tmp_path):
    inst = _write(tmp_path / "inst.json", {"producers": 2, "capacities": [4, 4], "distances": [[1, 2], [3, 4]]})
    stream = _write(tmp_path / "stream.json", {"requests": [
        {"t": 1, "producer": 0, "size": 3}, {"t": 2, "producer": 1, "size": 2},
    ]})
    return tmp_path, inst, stream


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_gen_roundtrip(tmp_path, capsys):
    inst, stream = str(tmp_path / "i.json"), str(tmp_path / "s.json")
    args = ["gen", "--producers", "2", "3", "--consumers", "2", "4", "--seed", "5"]
    assert cli.main(args + ["--instance-out", inst, "--stream-out", stream]) == 0
    assert capsys.readouterr().out == ""
    assert cli.main(args) == 0
    out = _json(capsys)
    assert out["instance"] == json.loads(open(inst).read())
    assert out["stream"] == json.loads(open(stream).read())


def test_solve_methods_agree(files, capsys):
    _, inst, stream = files
    assert cli.main(["solve", "--instance", inst, "--stream", stream]) == 0
    lp = _json(capsys)
    assert lp == {"cost": 10, "loads": [[3, 0], [1, 1]]}
    assert cli.main(["solve", "--instance", inst, "--stream", stream, "--method", "brute"]) == 0
    assert _json(capsys)["cost"] == 10
    assert cli.main(["solve", "--instance", inst, "--stream", stream, "--method", "pd"]) == 0
    pd = _json(capsys)
    assert pd["cost"] >= 10 and set(pd["duals"]) == {"y", "z"}


def test_solve_pd_trace_csv(files, capsys):
    tmp, inst, stream = files
    trace = tmp / "trace.csv"
    assert cli.main(["solve", "--instance", inst, "--stream", stream, "--method", "pd",
                     "--trace-csv", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "step,producer,consumer,amount,distance,delta1,delta2"
    assert len(lines) >= 2


def test_run_single_trial(files, capsys):
    _, inst, stream = files
    assert cli.main(["run", "--instance", inst, "--stream", stream, "--algo", "greedy"]) == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines() == ["trial,seed,cost,placed_units,aborted", "0,0,10,5,0"]
    assert json.loads(captured.err)["cost"] == 10


def test_run_many_trials_json(files, capsys):
    _, inst, stream = files
    assert cli.main(["run", "--instance", inst, "--stream", stream, "--algo", "cap-prop",
                     "--trials", "10", "--seed", "3", "--format", "json", "--verify"]) == 0
    out = _json(capsys)
    assert [t["seed"] for t in out["trials"]] == list(range(3, 13))
    assert out["summary"]["policy"] == "capacity-proportional"


def test_run_rounds_and_size(files, capsys):
    _, inst, _ = files
    assert cli.main(["run", "--instance", inst, "--rounds", "4", "--size", "1", "--algo", "uniform",
                     "--trials", "50", "--format", "json"]) == 0
    assert _json(capsys)["summary"]["predicted_cost"] == 10


def test_predict(files, capsys):
    _, inst, stream = files
    assert cli.main(["predict", "--instance", inst, "--stream", stream]) == 0
    out = _json(capsys)
    assert out["avg_ratio_uniform"] == "5/2" and out["worst_ratio"] == 4
    assert set(out["predicted_cost"]) == {"uniform-split", "capacity-proportional"}


def test_experiment(files, capsys, tmp_path):
    _, inst, stream = files
    csv_path = tmp_path / "trials.csv"
    assert cli.main(["experiment", "--instance", inst, "--stream", stream, "--algo", "uniform-split",
                     "--trials", "20", "--prefix", "--trials-csv", str(csv_path)]) == 0
    out = _json(capsys)
    assert out["completed"] == 20 and out["opt_cost"] == 10
    assert out["max_prefix_ratio"] >= 1
    assert len(csv_path.read_text().splitlines()) == 21


def test_sweep_is_reproducible(tmp_path, capsys):
    args = ["sweep", "--instances", "2", "--trials", "3", "--producers", "1", "3",
            "--consumers", "1", "3", "--seed", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    assert a.splitlines()[0].startswith("instance_id,m,n,")


def test_exit_invalid_input(tmp_path, files, capsys):
    _, inst, stream = files
    assert cli.main(["solve", "--instance", str(tmp_path / "missing.json"), "--stream", stream]) == 1
    bad = _write(tmp_path / "bad.json", {"capacities": [1.5], "distances": [[1]]})
    assert cli.main(["predict", "--instance", bad]) == 1
    assert cli.main(["run", "--instance", inst, "--algo", "greedy"]) == 1
    assert "invalid input" in capsys.readouterr().err


def test_exit_infeasible(tmp_path, files, capsys):
    _, inst, _ = files
    big = _write(tmp_path / "big.json", {"requests": [{"t": 1, "producer": 0, "size": 9}]})
    assert cli.main(["solve", "--instance", inst, "--stream", big]) == 2
    assert cli.main(["run", "--instance", inst, "--stream", big, "--algo", "greedy"]) == 2
    assert cli.main(["experiment", "--instance", inst, "--stream", big, "--algo", "greedy",
                     "--trials", "5"]) == 2


def test_exit_invariant(monkeypatch, files, capsys):
    _, inst, stream = files

    def broken(inst, demands):
        return Allocation(((9, 0), (0, 0))), 0

    monkeypatch.setattr(cli, "solve_lp_optimal", broken)
    assert cli.main(["solve", "--instance", inst, "--stream", stream]) == 3
    assert "invariant violation" in capsys.readouterr().err
