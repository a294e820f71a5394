"""Plain two-layer MLP classifiers used as reference points.

``fit_mlp`` on modality 0 alone is the unimodal baseline; on the column-wise
concatenation of several modalities it is the late-fusion baseline used for
latency comparison.
"""
from __future__ import annotations

import numpy as np

from . import numerics as nx
from .model import task_loss
from .train import Adam, TrainConfig, minibatches, seeds


def init_mlp(in_dim: int, hidden: int, rng) -> dict[str, np.ndarray]:
    return {
        "l1.W": nx.glorot_uniform(rng, hidden, in_dim),
        "l1.b": np.zeros(hidden),
        "l2.W": nx.glorot_uniform(rng, 1, hidden),
        "l2.b": np.zeros(1),
    }


def mlp_logits(params, x):
    h = nx.relu(nx.affine_forward(nx.AffineLayer(params["l1.W"], params["l1.b"]), x))
    return nx.affine_forward(nx.AffineLayer(params["l2.W"], params["l2.b"]), h)


def mlp_predict(params, x) -> np.ndarray:
    return nx.sigmoid(mlp_logits(params, np.asarray(x, dtype=np.float64)))[:, 0]


def fit_mlp(x, y, train_cfg: TrainConfig, hidden: int = 64) -> dict[str, np.ndarray]:
    """Binary cross-entropy MLP trained with the same Adam and batching as the chain."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    init_rng, order_rng = seeds(train_cfg.seed, 2)
    params = init_mlp(x.shape[1], hidden, init_rng)
    opt = Adam(train_cfg.learning_rate, train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps)
    for _ in range(train_cfg.epochs):
        for idx in minibatches(len(y), train_cfg.batch_size, order_rng):
            xb, yb = x[idx], y[idx]
            _, grads = nx.value_and_grad(
                lambda p: task_loss(mlp_logits(p, xb), yb, "binary_classification"), params
            )
            opt.step(params, grads)
    return params
