"""End-to-end command-line coverage over a temporary config."""

import json

import pytest

from driftcomp.cli import main

CONFIG = """
seed = 5

[data]
kind = "abrupt_concept"
n_slots = 3
rows_per_slot = 200
train_rows = 800
flip_slot = 2
n_users = 30
n_items = 20

[model]
embed_dim = 4
hidden = [16, 8]
lr = 1.0
epochs = 2
batch_size = 128

[memory]
bits_per_hash = 5
num_hashes = 4

[compensation]
lambda = 0.6

[methods]
run = ["frozen", "compensated"]
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(CONFIG)
    return str(path)


def test_run_prints_results(config_path, capsys):
    assert main(["run", "-c", config_path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("slot,method,auc,gauc,logloss\n")
    assert "overall,frozen," in out
    assert "overall,compensated," in out


def test_run_writes_outputs(config_path, tmp_path, capsys):
    out_dir = tmp_path / "artifacts"
    assert main(["run", "-c", config_path, "-o", str(out_dir)]) == 0
    assert (out_dir / "results.csv").exists()
    assert (out_dir / "model.npz").exists()
    assert (out_dir / "sketch.snap").exists()


def test_train_writes_checkpoint(config_path, tmp_path, capsys):
    out_dir = tmp_path / "ckpt"
    assert main(["train", "-c", config_path, "-o", str(out_dir)]) == 0
    assert (out_dir / "model.npz").exists()


def test_sweep_emits_curve(config_path, capsys):
    assert main(["sweep", "-c", config_path, "--param", "lambda",
                 "--values", "0.0,0.5,1.0"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "value,gauc,auc"
    assert len(lines) == 4


def test_bench_reports_ratios(config_path, capsys):
    assert main(["bench", "-c", config_path, "--ops", "200",
                 "--fill-levels", "500,5000"]) == 0
    out = capsys.readouterr().out
    assert "write slowdown" in out and "read slowdown" in out


def test_drift_report_prints_rows(config_path, capsys):
    assert main(["drift-report", "-c", config_path]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("slot,variance,n_users,n_items,ctr")
    assert len(lines) > 3


def test_snapshot_inspection(config_path, tmp_path, capsys):
    out_dir = tmp_path / "artifacts"
    main(["run", "-c", config_path, "-o", str(out_dir)])
    capsys.readouterr()
    assert main(["snapshot", str(out_dir / "sketch.snap")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["bits_per_hash"] == 5
    assert info["num_hashes"] == 4


def test_bad_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[memory]\nbackend = 'faiss'\n")
    assert main(["run", "-c", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_file_exits_nonzero(tmp_path, capsys):
    assert main(["run", "-c", str(tmp_path / "none.toml")]) == 2
