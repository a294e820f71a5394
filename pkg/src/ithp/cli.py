"""Command-line front end.

Every subcommand writes ``runspec.json`` into ``--out``; ``ithp replay
runspec.json`` re-executes the recorded arguments.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import checkpoint
from . import model as M
from .baselines import fit_mlp, mlp_predict
from .data import (
    DataError,
    Dataset,
    kfold,
    load_dataset,
    resolve_synth,
    synth_make,
    train_test_split,
    write_dataset,
)
from .metrics import MetricReport, binary_accuracy
from .ranking import greedy_rank, rank_by_sampen
from .train import TRAIN_PRESETS, TrainConfig, evaluate, fit, write_history_csv

log = logging.getLogger("ithp")

GRID_VALUES = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
LATENT_B0 = [8, 16, 32, 64, 128, 256]
LATENT_B1 = [8, 16, 32, 64, 128, 256]
METRIC_COLUMNS = ["precision", "recall", "fscore", "ba"]


class CLIError(Exception):
    pass


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def sub_seed(seed: int, index: int) -> int:
    """Fixed split of the run seed into independent integer sub-seeds."""
    return int(np.random.SeedSequence(seed).spawn(index + 1)[index].generate_state(1)[0])


# argument parsing


def _add_data(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="dataset manifest JSON")
    src.add_argument("--synth", help="'default' or a JSON file of generator settings")


def _add_model(p):
    p.add_argument("--preset", choices=sorted(M.PRESETS), default="sarcasm")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=_floats, help="comma list, one per level after the first")
    p.add_argument("--lambda", dest="lambdas", type=_floats, help="comma list, one per level after the first")
    p.add_argument("--alpha", type=float)
    p.add_argument("--latent-dims", type=_ints)
    p.add_argument("--hidden-dims", type=_ints)
    p.add_argument("--task", choices=M.TASK_KINDS)


def _add_train(p):
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=0, help="k-fold cross-validation (0: single held-out split)")
    p.add_argument("--test-frac", type=float, help="held-out share when --folds is 0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ithp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model, write checkpoint, history and metrics")
    _add_data(p), _add_model(p), _add_train(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_data(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["all", "test"], default="all",
                   help="'test' re-derives the held-out split of a train run with the same --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-frac", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="order modalities by richness")
    _add_data(p)
    p.add_argument("--method", choices=["sampen", "greedy"], default="sampen")
    p.add_argument("--epochs", type=int, default=20, help="probe epochs for the greedy method")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="grid over multipliers or latent sizes")
    _add_data(p), _add_model(p), _add_train(p)
    p.add_argument("--grid", default="beta,gamma", choices=["beta,gamma", "latent"])
    p.add_argument("--parallel", type=int, default=1, help="worker processes for independent cells")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="materialise a synthetic dataset")
    p.add_argument("--synth", default="default")
    p.add_argument("--seed", type=int, help="override the generator seed")
    p.add_argument("--format", choices=["float32", "csv"], default="float32")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="per-sample inference latency against a concatenation MLP")
    _add_data(p), _add_model(p), _add_train(p)
    p.add_argument("--checkpoint", help="skip training and time this checkpoint")
    p.add_argument("--calls", type=int, default=10_000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="re-run the command recorded in a runspec.json")
    p.add_argument("runspec")
    return parser


# shared plumbing


def load_data(args) -> tuple[Dataset, dict]:
    """Dataset plus the suggested overrides carried by a synthetic spec."""
    if args.manifest:
        return load_dataset(args.manifest), {}
    spec = resolve_synth(args.synth)
    return synth_make(spec), {"model": spec.model, "train": spec.train, "test_fraction": spec.test_fraction}


def build_configs(args, ds: Dataset, hints: dict) -> tuple[M.ITHPConfig, TrainConfig]:
    levels = len(ds.modalities) - 1
    kw = dict(hints.get("model", {}))
    if args.beta is not None:
        kw["beta"] = args.beta
    for name, value in (("gammas", args.gamma), ("lambdas", args.lambdas)):
        if value is not None:
            kw[name] = value * (levels - 1) if len(value) == 1 else value
    if args.alpha is not None:
        kw["alpha"] = args.alpha
    if args.latent_dims is not None:
        kw["latent_dims"] = args.latent_dims
        kw.setdefault("hidden_dims", [2 * d for d in args.latent_dims])
    if args.hidden_dims is not None:
        kw["hidden_dims"] = args.hidden_dims
    if "latent_dims" in kw and "hidden_dims" not in kw:
        kw["hidden_dims"] = [2 * d for d in kw["latent_dims"]]
    if args.task is not None:
        kw["task_kind"] = args.task
    elif ds.label_kind == "real":
        kw["task_kind"] = "regression"
    kw.setdefault("detector_kinds", list(ds.detector_kinds))
    # generator-suggested multipliers only apply to the chain length it was written for
    for name in ("gammas", "lambdas"):
        if name in kw and len(kw[name]) != levels - 1:
            kw[name] = kw[name][:1] * (levels - 1)
    for name in ("latent_dims", "hidden_dims"):
        if name in kw and len(kw[name]) != levels:
            raise CLIError(f"--{name.replace('_', '-')} needs {levels} values for {levels + 1} modalities")
    model_cfg = M.ITHPConfig.default(ds.dims, args.preset, **kw)

    tkw = dict(TRAIN_PRESETS[args.preset])
    tkw.update(hints.get("train", {}))
    for key, value in (("epochs", args.epochs), ("batch_size", args.batch), ("learning_rate", args.lr)):
        if value is not None:
            tkw[key] = value
    tkw["seed"] = sub_seed(args.seed, 1)
    return model_cfg, TrainConfig(**tkw)


def test_fraction(args, hints) -> float:
    if getattr(args, "test_frac", None) is not None:
        return args.test_frac
    return hints.get("test_fraction", 0.2)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(type(obj))


def write_runspec(out: Path, argv: list[str], args, **resolved) -> None:
    write_json(out / "runspec.json", {"argv": list(argv), "command": args.command, "resolved": resolved})


def run_split(model_cfg, train_cfg, ds: Dataset, train_idx, test_idx):
    params, history = fit(model_cfg, train_cfg, ds.subset(train_idx))
    report = evaluate(model_cfg, params, ds.subset(test_idx))
    return params, history, report


def cross_validate(model_cfg, train_cfg, ds: Dataset, k: int, seed: int):
    """Train on k-1 folds, score the held-out fold, average fold-level metrics."""
    folds = kfold(len(ds), k, sub_seed(seed, 0))
    results = []
    for i, test_idx in enumerate(folds):
        train_idx = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        params, history, report = run_split(model_cfg, train_cfg, ds, train_idx, test_idx)
        results.append((test_idx, params, history, report))
    return results, MetricReport.mean([r[3] for r in results])


# subcommands


def cmd_train(args, out: Path, argv) -> int:
    ds, hints = load_data(args)
    model_cfg, train_cfg = build_configs(args, ds, hints)
    write_runspec(out, argv, args, model=model_cfg.to_dict(), train=asdict(train_cfg), modalities=ds.ids)
    if args.folds:
        results, mean_report = cross_validate(model_cfg, train_cfg, ds, args.folds, args.seed)
        rows = []
        fold_dir = out / "folds"
        fold_dir.mkdir(exist_ok=True)
        for i, (test_idx, params, history, report) in enumerate(results):
            checkpoint.save(fold_dir / f"checkpoint_fold{i}.ithp", model_cfg, params, {"fold": i})
            write_history_csv(history, fold_dir / f"history_fold{i}.csv")
            (fold_dir / f"test_index_fold{i}.txt").write_text("\n".join(map(str, test_idx)) + "\n")
            rows.append({"fold": i, "n_test": len(test_idx), **{k: v for k, v in report.present().items() if k != "n"}})
        with (out / "folds.csv").open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        report = mean_report
    else:
        train_idx, test_idx = train_test_split(len(ds), test_fraction(args, hints), sub_seed(args.seed, 0))
        params, history, report = run_split(model_cfg, train_cfg, ds, train_idx, test_idx)
        checkpoint.save(out / "checkpoint.ithp", model_cfg, params)
        write_history_csv(history, out / "history.csv")
    (out / "metrics.json").write_text(report.to_json() + "\n")
    (out / "metrics.csv").write_text(report.to_csv())
    print(report.to_json())
    return 0


def cmd_eval(args, out: Path, argv) -> int:
    ds, hints = load_data(args)
    model_cfg, params, _ = checkpoint.load(args.checkpoint)
    if ds.dims != model_cfg.modality_dims:
        raise CLIError(f"dataset dims {ds.dims} do not match checkpoint {model_cfg.modality_dims}")
    if args.split == "test":
        _, idx = train_test_split(len(ds), test_fraction(args, hints), sub_seed(args.seed, 0))
        ds = ds.subset(idx)
    write_runspec(out, argv, args, checkpoint=str(args.checkpoint), n=len(ds))
    report = evaluate(model_cfg, params, ds)
    (out / "metrics.json").write_text(report.to_json() + "\n")
    (out / "metrics.csv").write_text(report.to_csv())
    print(report.to_json())
    return 0


def probe_evaluator(ds: Dataset, epochs: int, seed: int):
    """Validation accuracy of a small MLP on the concatenated subset."""
    train_idx, val_idx = train_test_split(len(ds), 0.25, sub_seed(seed, 2))
    y_tr, y_val = ds.labels[train_idx], ds.labels[val_idx]
    majority = float(y_tr.mean() >= 0.5)
    cache: dict[frozenset, float] = {}
    cfg = TrainConfig(epochs=epochs, batch_size=32, learning_rate=1e-3, seed=sub_seed(seed, 3))

    def evaluate_subset(subset: frozenset) -> float:
        if subset not in cache:
            if not subset:
                cache[subset] = binary_accuracy(np.full(y_val.size, majority), y_val)
            else:
                cols = [ds.modalities[ds.ids.index(m)] for m in sorted(subset, key=ds.ids.index)]
                x = np.hstack(cols)
                params = fit_mlp(x[train_idx], y_tr, cfg)
                preds = (mlp_predict(params, x[val_idx]) >= 0.5).astype(float)
                cache[subset] = binary_accuracy(preds, y_val)
        return cache[subset]

    return evaluate_subset


def cmd_rank(args, out: Path, argv) -> int:
    ds, _ = load_data(args)
    write_runspec(out, argv, args, modalities=ds.ids)
    if args.method == "sampen":
        ranked = rank_by_sampen(ds.modalities, ds.ids)
    else:
        ranked = greedy_rank(ds.ids, probe_evaluator(ds, args.epochs, args.seed))
    records = ranked.to_records()
    write_json(out / "ranking.json", records)
    print(json.dumps(records, indent=2))
    return 0


def _sweep_cell(job):
    cell, model_cfg, train_cfg, ds, folds, seed, frac = job
    if folds:
        _, report = cross_validate(model_cfg, train_cfg, ds, folds, seed)
    else:
        train_idx, test_idx = train_test_split(len(ds), frac, sub_seed(seed, 0))
        _, _, report = run_split(model_cfg, train_cfg, ds, train_idx, test_idx)
    return {**cell, **{k: getattr(report, k) for k in METRIC_COLUMNS}}


def sweep_cells(grid: str, model_cfg: M.ITHPConfig) -> list[tuple[dict, M.ITHPConfig]]:
    cells = []
    base = model_cfg.to_dict()
    if grid == "beta,gamma":
        if model_cfg.n_levels != 2:
            raise CLIError("the beta,gamma grid needs exactly three modalities")
        for gamma in GRID_VALUES:
            for beta in GRID_VALUES:
                cells.append(({"beta": beta, "gamma": gamma}, M.ITHPConfig(**{**base, "beta": beta, "gammas": [gamma]})))
    else:
        if model_cfg.n_levels != 2:
            raise CLIError("the latent grid needs exactly three modalities")
        for b0 in LATENT_B0:
            for b1 in LATENT_B1:
                cfg = M.ITHPConfig(**{**base, "latent_dims": [b0, b1], "hidden_dims": [2 * b0, 2 * b1]})
                cells.append(({"latent0": b0, "latent1": b1}, cfg))
    return cells


def cmd_sweep(args, out: Path, argv) -> int:
    ds, hints = load_data(args)
    model_cfg, train_cfg = build_configs(args, ds, hints)
    cells = sweep_cells(args.grid, model_cfg)
    write_runspec(out, argv, args, model=model_cfg.to_dict(), train=asdict(train_cfg), grid=args.grid, cells=len(cells))
    frac = test_fraction(args, hints)
    jobs = [(cell, cfg, train_cfg, ds, args.folds, args.seed, frac) for cell, cfg in cells]
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = []
        for job in jobs:
            rows.append(_sweep_cell(job))
            log.info("cell %s done", job[0])
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return 0


def cmd_synth(args, out: Path, argv) -> int:
    spec = resolve_synth(args.synth)
    if args.seed is not None:
        spec.seed = args.seed
    write_runspec(out, argv, args, spec=spec.to_dict())
    ds = synth_make(spec)
    manifest = write_dataset(ds, out, name="synthetic", dtype=args.format)
    write_json(out / "synth_spec.json", spec.to_dict())
    print(manifest)
    return 0


def assert_detectors_inactive(model_cfg, params, x0, rng) -> None:
    reference = M.predict(model_cfg, params, x0)
    perturbed = dict(params)
    for key in M.detector_keys(model_cfg):
        perturbed[key] = params[key] + rng.standard_normal(params[key].shape)
    if not np.array_equal(reference, M.predict(model_cfg, perturbed, x0)):
        raise AssertionError("prediction depends on detector parameters")


def _time_per_call(fn, rows: np.ndarray, calls: int) -> float:
    n = rows.shape[0]
    start = time.perf_counter()
    for i in range(calls):
        fn(rows[i % n : i % n + 1])
    return (time.perf_counter() - start) / calls * 1e3


def cmd_bench(args, out: Path, argv) -> int:
    ds, hints = load_data(args)
    if args.calls < 10_000:
        raise CLIError("--calls must be at least 10000")
    if args.checkpoint:
        model_cfg, params, _ = checkpoint.load(args.checkpoint)
        _, train_cfg = build_configs(args, ds, hints)
    else:
        model_cfg, train_cfg = build_configs(args, ds, hints)
        params, _ = fit(model_cfg, train_cfg, ds)
    rng = np.random.default_rng(sub_seed(args.seed, 4))
    x0 = ds.modalities[0]
    assert_detectors_inactive(model_cfg, params, x0[:64], rng)
    concat = np.hstack(ds.modalities)
    mlp = fit_mlp(concat, ds.labels, train_cfg, hidden=model_cfg.predictor_hidden)
    ithp_ms = _time_per_call(lambda r: M.predict(model_cfg, params, r), x0, args.calls)
    mlp_ms = _time_per_call(lambda r: mlp_predict(mlp, r), concat, args.calls)
    result = {
        "calls": args.calls,
        "ithp_ms_per_sample": ithp_ms,
        "concat_mlp_ms_per_sample": mlp_ms,
        "ratio": ithp_ms / mlp_ms,
        "detectors_inactive": True,
    }
    write_runspec(out, argv, args, model=model_cfg.to_dict())
    write_json(out / "bench.json", result)
    print(json.dumps(result, indent=2))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "rank": cmd_rank,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "replay":
        spec = json.loads(Path(args.runspec).read_text())
        return run(spec["argv"])
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out, argv)
    except (CLIError, DataError, M.ConfigError, checkpoint.CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"ithp {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
