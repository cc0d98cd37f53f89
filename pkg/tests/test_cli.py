import json

import numpy as np
import pytest

from graphkf.cli import main
from graphkf.io import load_checkpoint, load_episode
from graphkf.models import ReplicaModel, StgnnModel
from graphkf.simulate import generate_episode, nonlingss_config


@pytest.fixture(scope="module")
def episode_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "ep"
    code = main(["generate", "--preset", "lingss", "--nodes", "5", "--steps", "200", "--seed", "1", "-o", str(d)])
    assert code == 0
    return d


@pytest.fixture(scope="module")
def truth_checkpoint(tmp_path_factory, episode_dir):
    ck = tmp_path_factory.mktemp("ck") / "truth.json"
    code = main(["train", "--data", str(episode_dir), "--model", "replica", "--init", "truth",
                 "--epochs", "0", "-o", str(ck)])
    assert code == 0
    return ck


def test_generate_matches_library_and_prints_summary(tmp_path, capsys):
    d = tmp_path / "ep"
    assert main(["generate", "--preset", "nonlingss", "--nodes", "4", "--steps", "120",
                 "--seed", "3", "-o", str(d)]) == 0
    out = capsys.readouterr().out
    assert "ones-fraction" in out and "variance" in out
    ep = load_episode(d)
    want = generate_episode(nonlingss_config(n_nodes=4, length=120, seed=3))
    assert np.array_equal(ep.outputs, want.outputs)


def test_generate_seed_from_environment(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    monkeypatch.setenv("GKF_SEED", "7")
    assert main(["generate", "--nodes", "4", "--steps", "60", "-o", str(a)]) == 0
    monkeypatch.delenv("GKF_SEED")
    assert main(["generate", "--nodes", "4", "--steps", "60", "--seed", "7", "-o", str(b)]) == 0
    assert (a / "outputs.csv").read_bytes() == (b / "outputs.csv").read_bytes()

    monkeypatch.setenv("GKF_SEED", "not-a-number")
    assert main(["generate", "--nodes", "4", "--steps", "60", "-o", str(tmp_path / "c")]) == 2


def test_generate_config_file_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"length": 80, "n_nodes": 3}))
    d = tmp_path / "ep"
    assert main(["generate", "--config", str(cfg), "--seed", "0", "-o", str(d)]) == 0
    ep = load_episode(d)
    assert ep.length == 80 and ep.n_nodes == 3

    cfg.write_text(json.dumps({"sparkle": 1}))
    assert main(["generate", "--config", str(cfg), "-o", str(tmp_path / "x")]) == 3


def test_generate_unstable_config_is_numerical_failure(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"time_weight": 9.0, "length": 500, "n_nodes": 4}))
    assert main(["generate", "--config", str(cfg), "--seed", "0", "-o", str(tmp_path / "x")]) == 4


def test_train_truth_init_epochs_zero(episode_dir, truth_checkpoint):
    model, meta = load_checkpoint(truth_checkpoint)
    assert isinstance(model, ReplicaModel)
    assert np.array_equal(model.get_param_vector(), [0.6, 0.3, -0.5, 2.0])
    assert meta["extra"]["epochs_run"] == 0
    metrics = truth_checkpoint.with_suffix("").parent / "truth.metrics.csv"
    assert metrics.read_text() == "epoch,train_mse,val_mse\n"


def test_train_random_replica_descends(episode_dir, tmp_path, capsys):
    ck = tmp_path / "fit.json"
    assert main(["train", "--data", str(episode_dir), "--model", "replica", "--seed", "2",
                 "--epochs", "3", "--lr", "0.05", "--batch-size", "8", "-o", str(ck)]) == 0
    out = capsys.readouterr().out
    assert "run 0" in out
    model, _ = load_checkpoint(ck)
    assert isinstance(model, ReplicaModel)
    lines = (tmp_path / "fit.metrics.csv").read_text().strip().splitlines()
    assert lines[0] == "epoch,train_mse,val_mse"
    assert len(lines) == 4
    val = [float(ln.split(",")[2]) for ln in lines[1:]]
    assert val[-1] < val[0]


def test_train_stgnn_smoke_and_truth_refusal(episode_dir, tmp_path):
    ck = tmp_path / "stgnn.json"
    assert main(["train", "--data", str(episode_dir), "--model", "stgnn", "--seed", "0",
                 "--epochs", "1", "-o", str(ck)]) == 0
    model, _ = load_checkpoint(ck)
    assert isinstance(model, StgnnModel)
    assert main(["train", "--data", str(episode_dir), "--model", "stgnn", "--init", "truth",
                 "--epochs", "1", "-o", str(ck)]) == 2


def test_train_multiple_runs_write_suffixed_checkpoints(episode_dir, tmp_path, capsys):
    ck = tmp_path / "multi.json"
    assert main(["train", "--data", str(episode_dir), "--init", "truth", "--runs", "2",
                 "--epochs", "0", "-o", str(ck)]) == 0
    assert (tmp_path / "multi.run0.json").exists()
    assert (tmp_path / "multi.run1.json").exists()
    assert "aggregate over 2 runs" in capsys.readouterr().out


def test_evaluate_writes_stable_row_and_trace(episode_dir, truth_checkpoint, tmp_path):
    row_path, trace_path = tmp_path / "row.json", tmp_path / "trace.csv"
    args = ["evaluate", "--data", str(episode_dir), "--checkpoint", str(truth_checkpoint),
            "--name", "replica-truth", "--out", str(row_path), "--trace", str(trace_path)]
    assert main(args) == 0
    row = json.loads(row_path.read_text())
    assert row["model"] == "replica-truth"
    assert row["dataset"] == "lingss"
    assert row["n_predictions"] == 39  # test segment [160, 200)
    assert "runtime_s" not in row
    assert row["mse_w_kfr"] < row["mse_wo_kfr"]
    trace_lines = trace_path.read_text().strip().splitlines()
    assert len(trace_lines) == 40  # header + one row per scored step

    first = row_path.read_bytes()
    assert main(args) == 0
    assert row_path.read_bytes() == first


def test_evaluate_oracle_row(episode_dir, tmp_path):
    row_path = tmp_path / "gt.json"
    assert main(["evaluate", "--data", str(episode_dir), "--oracle", "gt", "--out", str(row_path)]) == 0
    row = json.loads(row_path.read_text())
    assert row["model"] == "gt"
    assert row["mse_w_kfr"] == row["mse_wo_kfr"]


def test_evaluate_usage_and_mismatch_errors(episode_dir, truth_checkpoint, tmp_path):
    assert main(["evaluate", "--data", str(episode_dir)]) == 2
    other = tmp_path / "other"
    assert main(["generate", "--nodes", "6", "--steps", "100", "--seed", "4", "-o", str(other)]) == 0
    assert main(["evaluate", "--data", str(other), "--checkpoint", str(truth_checkpoint)]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--data", str(episode_dir), "--checkpoint", str(truth_checkpoint), "--kfr", "maybe"])
    assert exc.value.code == 2


def test_report_table_csv_and_node_traces(episode_dir, truth_checkpoint, tmp_path, capsys):
    rows = []
    for i, kfr in enumerate(("both", "off")):
        p = tmp_path / f"row{i}.json"
        assert main(["evaluate", "--data", str(episode_dir), "--checkpoint", str(truth_checkpoint),
                     "--kfr", kfr, "--name", f"m{i}", "--out", str(p)]) == 0
        rows.append(p)
    capsys.readouterr()

    table_path, csv_path, nodes_path = tmp_path / "t.txt", tmp_path / "r.csv", tmp_path / "n.csv"
    assert main(["report", "--row", str(rows[0]), "--row", str(rows[1]), "--out", str(table_path),
                 "--csv", str(csv_path), "--episode", str(episode_dir),
                 "--trace-out", str(nodes_path), "--nodes", "0,2"]) == 0
    table = table_path.read_text()
    assert "m0" in table and "m1" in table
    assert csv_path.read_text().startswith("model,dataset,n_predictions")
    node_lines = nodes_path.read_text().strip().splitlines()
    assert node_lines[0] == "t,node,input,state,output"
    assert len(node_lines) == 1 + 2 * 200

    assert main(["report", "--row", str(tmp_path / "missing.json")]) == 3
    assert main(["report"]) == 2
    assert main(["report", "--episode", str(episode_dir)]) == 2  # needs --trace-out
    assert main(["report", "--episode", str(episode_dir), "--trace-out", str(nodes_path), "--nodes", "9"]) == 2
