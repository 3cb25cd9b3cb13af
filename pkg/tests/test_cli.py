import json
from pathlib import Path

import numpy as np
import pytest

from downwash.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from downwash.models import load_model

MINI_CFG = """
seed: 21
output_dir: {out}
sweep: {{legs: 4, samples_per_leg: 10, altitudes: [0.3, 1.3]}}
datasets:
  - {{name: single_k1, kind: side_by_side, k: 1, oracle: merging, legs: 8, samples_per_leg: 20}}
  - {{name: leader_follower_k3, kind: leader_follower, k: 3, oracle: merging}}
training: {{epochs: 2, batch_size: 64}}
models:
  naive: {{fit_on: single_k1, resolution: [8, 10]}}
  linear: {{train_on: [single_k1]}}
  deepset: {{train_on: [leader_follower_k3]}}
eval:
  formations: [{{kind: leader_follower, k: 3}}]
  altitudes: [1.3]
  resolution: 16
  slice_resolution: 41
  contour_resolution: 16
"""


def _cfg(tmp_path, out_name="run") -> Path:
    path = tmp_path / "cfg.yaml"
    path.write_text(MINI_CFG.format(out=tmp_path / out_name), encoding="utf-8")
    return path


def test_gen_writes_dataset_and_sidecar(tmp_path):
    cfg = _cfg(tmp_path)
    assert main(["gen", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "run" / "datasets"
    assert (out / "single_k1.csv").exists()
    assert (out / "single_k1.json").exists()
    meta = json.loads((out / "single_k1.json").read_text())
    assert meta["metadata"]["oracle"] == "merging"


def test_gen_is_byte_deterministic(tmp_path):
    cfg = _cfg(tmp_path)
    main(["gen", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["gen", "--config", str(cfg), "--out", str(tmp_path / "b")])
    for name in ("single_k1.csv", "leader_follower_k3.csv"):
        assert (tmp_path / "a" / "datasets" / name).read_bytes() == (
            tmp_path / "b" / "datasets" / name
        ).read_bytes()


def test_default_config_enumerates_full_suite(tmp_path):
    # the shipped full suite covers K=1 plus the four multi-vehicle formations
    args = [
        "gen",
        "--config",
        "configs/default.yaml",
        "--out",
        str(tmp_path / "suite"),
        "--set",
        "sweep.legs=2",
        "--set",
        "sweep.samples_per_leg=3",
        "--set",
        "sweep.altitudes=[0.8]",
        "--set",
        "datasets=[{name: single_k1, kind: side_by_side, k: 1, oracle: merging},"
        " {name: side_by_side_k2, kind: side_by_side, k: 2, oracle: merging},"
        " {name: stack_k2, kind: stack, k: 2, oracle: merging},"
        " {name: leader_follower_k3, kind: leader_follower, k: 3, oracle: merging},"
        " {name: hybrid3_k3, kind: hybrid3, k: 3, oracle: merging}]",
    ]
    assert main(args) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "suite" / "datasets").glob("*.csv"))
    assert files == [
        "hybrid3_k3.csv",
        "leader_follower_k3.csv",
        "side_by_side_k2.csv",
        "single_k1.csv",
        "stack_k2.csv",
    ]


def test_train_zero_learning_rate_roundtrips_init(tmp_path):
    cfg = _cfg(tmp_path)
    main(["gen", "--config", str(cfg)])
    assert (
        main(["train", "--config", str(cfg), "--set", "training.learning_rate=0.0"]) == EXIT_OK
    )
    out = tmp_path / "run" / "models"
    model_a = load_model(out / "learnt_linear.json")
    # retrain with lr=0 again: identical bytes (same init stream, no updates)
    blob_a = (out / "learnt_linear.json").read_bytes()
    main(["train", "--config", str(cfg), "--set", "training.learning_rate=0.0"])
    assert (out / "learnt_linear.json").read_bytes() == blob_a
    assert model_a.metadata["learning_rate"] == 0.0


def test_train_loss_history_reproducible(tmp_path):
    cfg = _cfg(tmp_path)
    main(["gen", "--config", str(cfg)])
    main(["train", "--config", str(cfg)])
    hist_a = (tmp_path / "run" / "models" / "learnt_nonlinear_loss.csv").read_bytes()
    main(["train", "--config", str(cfg)])
    hist_b = (tmp_path / "run" / "models" / "learnt_nonlinear_loss.csv").read_bytes()
    assert hist_a == hist_b


def test_eval_and_report_outputs(tmp_path):
    cfg = _cfg(tmp_path)
    main(["gen", "--config", str(cfg)])
    main(["train", "--config", str(cfg)])
    assert main(["eval", "--config", str(cfg)]) == EXIT_OK
    reports = tmp_path / "run" / "reports"
    table = (reports / "benchmark.csv").read_text().splitlines()
    assert table[0].startswith("formation,k,altitude,model,err_f_n")
    assert len(table) == 1 + 3  # three models, one formation/altitude
    doc = json.loads((reports / "benchmark.json").read_text())
    assert {row["model"] for row in doc["rows"]} == {
        "naive_linear",
        "learnt_linear",
        "learnt_nonlinear",
    }
    assert main(["report", "--config", str(cfg)]) == EXIT_OK
    assert (reports / "slice_leader_follower_k3_1p3.csv").exists()
    assert (reports / "contour_leader_follower_k3_1p3_ground_truth.csv").exists()


def test_missing_config_is_io_error(tmp_path):
    assert main(["gen", "--config", str(tmp_path / "nope.yaml")]) == EXIT_IO


def test_invalid_config_exit_code(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("sweep: {legs: -3}\n", encoding="utf-8")
    assert main(["gen", "--config", str(path)]) == EXIT_CONFIG


def test_missing_models_reported_clearly(tmp_path, capsys):
    cfg = _cfg(tmp_path)
    assert main(["eval", "--config", str(cfg)]) == EXIT_IO
    err = capsys.readouterr().err
    assert "naive_linear" in err and "train" in err


def test_bad_override_exit_code(tmp_path):
    cfg = _cfg(tmp_path)
    assert main(["gen", "--config", str(cfg), "--set", "nonsense"]) == EXIT_CONFIG
