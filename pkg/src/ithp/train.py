"""Mini-batch Adam training and held-out evaluation."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import model as M
from .data import Dataset
from .metrics import MetricError, MetricReport, classification_report, regression_report
from .numerics import NumericalError, value_and_grad

log = logging.getLogger(__name__)

TRAIN_PRESETS = {
    "sarcasm": dict(epochs=200, learning_rate=1e-3),
    "sentiment": dict(epochs=40, learning_rate=1e-5),
}


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise M.ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise M.ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise M.ConfigError(f"learning rate must be > 0, got {self.learning_rate}")


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {params[name].shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    total: float
    overall: float
    task: float
    kl: list[float]
    det: list[float]
    valid: dict = field(default_factory=dict)


def _mean_breakdowns(items: list[tuple[int, M.LossBreakdown]]) -> dict:
    n = sum(w for w, _ in items)

    def avg(get):
        return float(sum(w * get(b) for w, b in items) / n)

    levels = len(items[0][1].kl_terms)
    return dict(
        total=avg(lambda b: b.total),
        overall=avg(lambda b: b.overall),
        task=avg(lambda b: b.task_term),
        kl=[avg(lambda b, k=k: b.kl_terms[k]) for k in range(levels)],
        det=[avg(lambda b, k=k: b.detector_terms[k]) for k in range(levels)],
    )


def seeds(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators split off one run seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def fit(model_cfg: M.ITHPConfig, train_cfg: TrainConfig, dataset: Dataset, valid: Dataset | None = None):
    """Train from a fresh initialisation; returns ``(params, history)``."""
    if dataset.dims != model_cfg.modality_dims:
        raise M.ConfigError(f"dataset dims {dataset.dims} do not match config {model_cfg.modality_dims}")
    init_rng, order_rng, noise_rng = seeds(train_cfg.seed, 3)
    params = M.init_params(model_cfg, init_rng)
    opt = Adam(train_cfg.learning_rate, train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps)
    history: list[EpochRecord] = []
    for epoch in range(1, train_cfg.epochs + 1):
        seen = []
        for step, idx in enumerate(minibatches(len(dataset), train_cfg.batch_size, order_rng)):
            mods = [m[idx] for m in dataset.modalities]
            y = dataset.labels[idx]
            noise = M.sample_noise(model_cfg, noise_rng, idx.size)
            try:
                loss, breakdown, grads = value_and_grad(
                    lambda p: M.ithp_loss(model_cfg, p, mods, y, noise), params, has_aux=True
                )
            except NumericalError as exc:
                raise TrainingError(f"epoch {epoch}, step {step}: {exc}") from exc
            if not math.isfinite(loss):
                raise TrainingError(f"epoch {epoch}, step {step}: non-finite loss {loss}")
            opt.step(params, grads)
            seen.append((idx.size, breakdown))
        record = EpochRecord(epoch=epoch, **_mean_breakdowns(seen))
        if valid is not None:
            record.valid = evaluate(model_cfg, params, valid).present()
        history.append(record)
        log.debug("epoch %d total %.5f", epoch, record.total)
    return params, history


def evaluate(model_cfg: M.ITHPConfig, params, dataset: Dataset) -> MetricReport:
    if len(dataset) == 0:
        raise MetricError("cannot evaluate on an empty dataset")
    out = M.predict(model_cfg, params, dataset.modalities[0])
    if model_cfg.task_kind == "binary_classification":
        return classification_report(out, dataset.labels)
    return regression_report(out, dataset.labels)


def history_rows(history: list[EpochRecord]) -> list[dict]:
    rows = []
    for rec in history:
        row = {"epoch": rec.epoch, "mean_total": rec.total, "mean_overall": rec.overall, "mean_task": rec.task}
        for k, (kl, det) in enumerate(zip(rec.kl, rec.det)):
            row[f"kl_{k}"] = kl
            row[f"det_{k}"] = det
        for key, value in rec.valid.items():
            row[f"valid_{key}"] = value
        rows.append(row)
    return rows


def write_history_csv(history: list[EpochRecord], path) -> None:
    rows = history_rows(history)
    fields = list(rows[0]) if rows else ["epoch"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def train_config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
