import csv
import json

import numpy as np
import pytest

from ithp import checkpoint
from ithp import model as M
from ithp.cli import run, sub_seed
from ithp.data import Dataset, SynthSpec, write_dataset


@pytest.fixture
def tiny_synth(tmp_path):
    spec = SynthSpec(n=80, dims=[6, 5, 4], signal_dim=1, signal_strength=2.0, noise=0.5, seed=3,
                     model={"latent_dims": [4, 2]}, train={"epochs": 2})
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(spec.to_dict()))
    return str(path)


def perfect_fixture(tmp_path):
    """Dataset plus a hand-set checkpoint whose prediction equals the label."""
    y = np.array([0, 1, 1, 0, 1, 0], dtype=float)
    x0 = np.stack([y, 1 - y], axis=1)
    rng = np.random.default_rng(0)
    ds = Dataset([x0, rng.standard_normal((6, 2)), rng.standard_normal((6, 3))], y)
    manifest = write_dataset(ds, tmp_path / "perfect", dtype="csv")
    cfg = M.ITHPConfig([2, 2, 3], [2, 2], [2, 2], predictor_hidden=2)
    params = M.init_params(cfg, rng)
    for k in range(2):
        for layer in ("enc", "mu"):
            params[f"level{k}.{layer}.W"] = np.eye(2)
            params[f"level{k}.{layer}.b"] = np.zeros(2)
        params[f"level{k}.logvar.W"] = np.zeros((2, 2))
        params[f"level{k}.logvar.b"] = np.zeros(2)
    params["predictor.l1.W"], params["predictor.l1.b"] = np.eye(2), np.zeros(2)
    params["predictor.l2.W"], params["predictor.l2.b"] = np.array([[10.0, -10.0]]), np.zeros(1)
    ckpt = tmp_path / "perfect.ithp"
    checkpoint.save(ckpt, cfg, params)
    return manifest, ckpt


def test_eval_perfect_fixture(tmp_path):
    manifest, ckpt = perfect_fixture(tmp_path)
    out = tmp_path / "eval"
    assert run(["eval", "--manifest", str(manifest), "--checkpoint", str(ckpt), "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["ba"] == 1.0 and metrics["precision"] == 1.0
    assert (out / "metrics.csv").read_text().startswith("precision,")


def test_train_outputs_and_determinism(tmp_path, tiny_synth):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["train", "--synth", tiny_synth, "--seed", "5", "--out", str(out)]) == 0
    assert (a / "checkpoint.ithp").read_bytes() == (b / "checkpoint.ithp").read_bytes()
    for name in ("history.csv", "metrics.json", "metrics.csv", "runspec.json"):
        assert (a / name).exists()
    cfg, _, _ = checkpoint.load(a / "checkpoint.ithp")
    assert cfg.latent_dims == [4, 2]
    spec = json.loads((a / "runspec.json").read_text())
    assert spec["resolved"]["train"]["epochs"] == 2


def test_flags_override_synth_hints(tmp_path, tiny_synth):
    out = tmp_path / "o"
    argv = ["train", "--synth", tiny_synth, "--beta", "3", "--gamma", "5", "--lambda", "0.5", "--alpha", "0",
            "--latent-dims", "3,3", "--hidden-dims", "7,7", "--epochs", "1", "--batch", "9", "--lr", "0.01", "--out", str(out)]
    assert run(argv) == 0
    resolved = json.loads((out / "runspec.json").read_text())["resolved"]
    m, t = resolved["model"], resolved["train"]
    assert (m["beta"], m["gammas"], m["lambdas"], m["alpha"]) == (3.0, [5.0], [0.5], 0.0)
    assert (m["latent_dims"], m["hidden_dims"]) == ([3, 3], [7, 7])
    assert (t["epochs"], t["batch_size"], t["learning_rate"]) == (1, 9, 0.01)


def test_replay_reproduces(tmp_path, tiny_synth):
    out = tmp_path / "r"
    assert run(["train", "--synth", tiny_synth, "--seed", "2", "--out", str(out)]) == 0
    first = (out / "checkpoint.ithp").read_bytes()
    (out / "checkpoint.ithp").unlink()
    assert run(["replay", str(out / "runspec.json")]) == 0
    assert (out / "checkpoint.ithp").read_bytes() == first


def test_folds(tmp_path, tiny_synth):
    out = tmp_path / "f"
    assert run(["train", "--synth", tiny_synth, "--folds", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "folds.csv").open()))
    assert [int(r["n_test"]) for r in rows] == [20] * 4
    assert len(list((out / "folds").glob("checkpoint_fold*.ithp"))) == 4
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["ba"] == pytest.approx(np.mean([float(r["ba"]) for r in rows]), abs=1e-12)


def test_eval_test_split_matches_train(tmp_path, tiny_synth):
    out = tmp_path / "t"
    assert run(["train", "--synth", tiny_synth, "--seed", "4", "--out", str(out)]) == 0
    ev = tmp_path / "e"
    assert run(["eval", "--synth", tiny_synth, "--checkpoint", str(out / "checkpoint.ithp"),
                "--split", "test", "--seed", "4", "--out", str(ev)]) == 0
    assert json.loads((ev / "metrics.json").read_text()) == json.loads((out / "metrics.json").read_text())


@pytest.mark.parametrize("method", ["sampen", "greedy"])
def test_rank(tmp_path, tiny_synth, method):
    out = tmp_path / method
    assert run(["rank", "--synth", tiny_synth, "--method", method, "--epochs", "2", "--out", str(out)]) == 0
    records = json.loads((out / "ranking.json").read_text())
    assert sorted(r["modality"] for r in records) == ["m0", "m1", "m2"]
    assert all(r["method"] == method for r in records)


def test_synth_materialises(tmp_path, tiny_synth):
    out = tmp_path / "s"
    assert run(["synth", "--synth", tiny_synth, "--format", "csv", "--out", str(out)]) == 0
    assert (out / "manifest.json").exists() and (out / "m0.csv").exists()
    assert json.loads((out / "synth_spec.json").read_text())["n"] == 80


def test_sweep_latent_grid(tmp_path, tiny_synth):
    out = tmp_path / "sw"
    assert run(["sweep", "--synth", tiny_synth, "--grid", "latent", "--epochs", "1", "--parallel", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert len(rows) == 36
    assert {(int(r["latent0"]), int(r["latent1"])) for r in rows} == {
        (a, b) for a in (8, 16, 32, 64, 128, 256) for b in (8, 16, 32, 64, 128, 256)
    }


def test_bench(tmp_path, tiny_synth):
    out = tmp_path / "b"
    assert run(["bench", "--synth", tiny_synth, "--calls", "10000", "--out", str(out)]) == 0
    result = json.loads((out / "bench.json").read_text())
    assert result["detectors_inactive"] and result["calls"] == 10000
    assert result["ithp_ms_per_sample"] > 0 and result["concat_mlp_ms_per_sample"] > 0
    assert run(["bench", "--synth", tiny_synth, "--calls", "10", "--out", str(out)]) == 2


def test_errors_exit_nonzero(tmp_path, tiny_synth, capsys):
    assert run(["train", "--bogus"]) != 0
    assert run(["train", "--manifest", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 2
    assert "error" in capsys.readouterr().err
    assert run(["train", "--synth", tiny_synth, "--latent-dims", "3", "--out", str(tmp_path / "y")]) == 2
    assert run(["train", "--synth", tiny_synth, "--manifest", "m.json", "--out", str(tmp_path / "z")]) != 0


def test_sub_seeds_are_fixed_and_distinct():
    assert sub_seed(1, 0) == sub_seed(1, 0)
    assert len({sub_seed(1, i) for i in range(5)}) == 5


def test_rank_needs_enough_features(tmp_path, capsys):
    manifest, _ = perfect_fixture(tmp_path)
    assert run(["rank", "--manifest", str(manifest), "--out", str(tmp_path / "rk")]) == 2
    assert "m + 2" in capsys.readouterr().err
