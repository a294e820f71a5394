"""Hierarchical chain of variational bottleneck levels.

Only the prime modality X0 enters the network. Level 0 encodes X0 into a
Gaussian latent B0, level k > 0 encodes a sample of B(k-1) into Bk, and each
level carries a detector head that predicts the next modality X(k+1) from its
sampled latent. A two-layer predictor maps the last latent to the task output.
Detectors are only used by the training loss; :func:`predict` never touches
them.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import numerics as nx
from .gaussian import LOG_VAR_BOUND, DiagGaussian, kl_std_normal, reparameterize

DETECTOR_KINDS = ("continuous", "categorical")
TASK_KINDS = ("binary_classification", "regression")

PRESETS = {
    # beta, gamma, lambda
    "sarcasm": (32.0, 8.0, 1.0),
    "sentiment": (8.0, 32.0, 1.0),
}


class ConfigError(ValueError):
    pass


@dataclass
class ITHPConfig:
    """Architecture and loss multipliers for a chain over ``len(modality_dims)`` modalities.

    ``gammas`` and ``lambdas`` hold one entry per level after the first.
    """

    modality_dims: list[int]
    latent_dims: list[int]
    hidden_dims: list[int]
    beta: float = 32.0
    gammas: list[float] = field(default_factory=lambda: [8.0])
    lambdas: list[float] = field(default_factory=lambda: [1.0])
    alpha: float = 1.0
    detector_kinds: list[str] = field(default_factory=list)
    task_kind: str = "binary_classification"
    predictor_hidden: int = 64

    def __post_init__(self):
        self.modality_dims = [int(d) for d in self.modality_dims]
        self.latent_dims = [int(d) for d in self.latent_dims]
        self.hidden_dims = [int(d) for d in self.hidden_dims]
        self.gammas = [float(g) for g in self.gammas]
        self.lambdas = [float(v) for v in self.lambdas]
        self.beta = float(self.beta)
        self.alpha = float(self.alpha)
        if not self.detector_kinds:
            self.detector_kinds = ["continuous"] * self.n_levels
        self.detector_kinds = list(self.detector_kinds)
        self.validate()

    @property
    def n_modalities(self) -> int:
        return len(self.modality_dims)

    @property
    def n_levels(self) -> int:
        return len(self.modality_dims) - 1

    @property
    def multipliers(self) -> list[float]:
        """Relevance weight of each level: beta, then gamma_0, gamma_1, ..."""
        return [self.beta, *self.gammas]

    @property
    def ib_scale(self) -> float:
        """Weight on the overall bottleneck loss inside the total loss."""
        return self.n_levels / (self.beta + sum(self.gammas))

    def validate(self):
        levels = self.n_levels
        if levels < 1:
            raise ConfigError("need at least two modalities")
        if any(d < 1 for d in self.modality_dims):
            raise ConfigError(f"modality dims must be positive: {self.modality_dims}")
        for name, seq in (("latent_dims", self.latent_dims), ("hidden_dims", self.hidden_dims)):
            if len(seq) != levels:
                raise ConfigError(f"{name} needs {levels} entries, got {len(seq)}")
            if any(d < 1 for d in seq):
                raise ConfigError(f"{name} must be positive: {seq}")
        for name, seq in (("gammas", self.gammas), ("lambdas", self.lambdas)):
            if len(seq) != levels - 1:
                raise ConfigError(f"{name} needs {levels - 1} entries, got {len(seq)}")
            if any(not v > 0 for v in seq):
                raise ConfigError(f"{name} must be strictly positive: {seq}")
        if not self.beta > 0:
            raise ConfigError(f"beta must be strictly positive, got {self.beta}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if len(self.detector_kinds) != levels or any(k not in DETECTOR_KINDS for k in self.detector_kinds):
            raise ConfigError(f"detector_kinds must be {levels} of {DETECTOR_KINDS}: {self.detector_kinds}")
        if self.task_kind not in TASK_KINDS:
            raise ConfigError(f"task_kind must be one of {TASK_KINDS}")
        if self.predictor_hidden < 1:
            raise ConfigError("predictor_hidden must be positive")

    @classmethod
    def default(cls, modality_dims: Sequence[int], preset: str = "sarcasm", **overrides) -> "ITHPConfig":
        """Defaults for any modality count: latents 128, 64, then halving (floor 8)."""
        levels = len(modality_dims) - 1
        beta, gamma, lam = PRESETS[preset]
        latent = [max(8, 128 >> k) for k in range(levels)]
        kwargs = dict(
            modality_dims=list(modality_dims),
            latent_dims=latent,
            hidden_dims=[2 * d for d in latent],
            beta=beta,
            gammas=[gamma] * (levels - 1),
            lambdas=[lam] * (levels - 1),
        )
        kwargs.update(overrides)
        if "latent_dims" in overrides and "hidden_dims" not in overrides:
            kwargs["hidden_dims"] = [2 * d for d in kwargs["latent_dims"]]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ITHPConfig":
        return cls(**d)


# parameters


def layer_shapes(cfg: ITHPConfig) -> dict[str, tuple[int, int]]:
    """(out, in) shape of every affine layer, in canonical order."""
    shapes = {}
    inputs = [cfg.modality_dims[0], *cfg.latent_dims[:-1]]
    for k in range(cfg.n_levels):
        hid, lat = cfg.hidden_dims[k], cfg.latent_dims[k]
        shapes[f"level{k}.enc"] = (hid, inputs[k])
        shapes[f"level{k}.mu"] = (lat, hid)
        shapes[f"level{k}.logvar"] = (lat, hid)
        shapes[f"level{k}.det1"] = (hid, lat)
        shapes[f"level{k}.det2"] = (cfg.modality_dims[k + 1], hid)
    shapes["predictor.l1"] = (cfg.predictor_hidden, cfg.latent_dims[-1])
    shapes["predictor.l2"] = (1, cfg.predictor_hidden)
    return shapes


def init_params(cfg: ITHPConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for name, (fan_out, fan_in) in layer_shapes(cfg).items():
        params[f"{name}.W"] = nx.glorot_uniform(rng, fan_out, fan_in)
        params[f"{name}.b"] = np.zeros(fan_out)
    return params


def detector_keys(cfg: ITHPConfig) -> list[str]:
    return [
        f"level{k}.{part}.{wb}"
        for k in range(cfg.n_levels)
        for part in ("det1", "det2")
        for wb in ("W", "b")
    ]


def _layer(params, name) -> nx.AffineLayer:
    return nx.AffineLayer(params[f"{name}.W"], params[f"{name}.b"])


def _mlp(params, first, second, x):
    hidden = nx.relu(nx.affine_forward(_layer(params, first), x))
    return nx.affine_forward(_layer(params, second), hidden)


# forward pass


class LevelOutput(NamedTuple):
    gaussian: DiagGaussian
    z: object
    detector_pred: object


def encode_level(params, k: int, x) -> DiagGaussian:
    hidden = nx.relu(nx.affine_forward(_layer(params, f"level{k}.enc"), x))
    mu = nx.affine_forward(_layer(params, f"level{k}.mu"), hidden)
    log_var = nx.clip(nx.affine_forward(_layer(params, f"level{k}.logvar"), hidden), -LOG_VAR_BOUND, LOG_VAR_BOUND)
    return DiagGaussian(mu, log_var)


def forward_chain(cfg: ITHPConfig, params, x0, noise=None) -> list[LevelOutput]:
    """Run every level on a batch of X0.

    ``noise`` is a list with one (batch, latent_dim) standard-normal array per
    level; ``None`` runs deterministically with z equal to the mean.
    """
    x0v = nx.value_of(x0)
    if x0v.ndim != 2 or x0v.shape[1] != cfg.modality_dims[0]:
        raise nx.DimensionError(f"X0 batch must be (n, {cfg.modality_dims[0]}), got {x0v.shape}")
    if noise is not None and len(noise) != cfg.n_levels:
        raise nx.DimensionError(f"expected {cfg.n_levels} noise arrays, got {len(noise)}")
    outputs = []
    inp = x0
    for k in range(cfg.n_levels):
        g = encode_level(params, k, inp)
        z = g.mean if noise is None else reparameterize(g, noise[k])
        pred = _mlp(params, f"level{k}.det1", f"level{k}.det2", z)
        outputs.append(LevelOutput(g, z, pred))
        inp = z
    return outputs


def predictor_forward(params, z):
    return nx.affine_forward(_layer(params, "predictor.l2"), nx.relu(nx.affine_forward(_layer(params, "predictor.l1"), z)))


def predict(cfg: ITHPConfig, params, x0) -> np.ndarray:
    """Deterministic inference: encoder means only, detectors skipped.

    Returns probabilities for binary classification, real values for regression.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 2 or x0.shape[1] != cfg.modality_dims[0]:
        raise nx.DimensionError(f"X0 batch must be (n, {cfg.modality_dims[0]}), got {x0.shape}")
    z = x0
    for k in range(cfg.n_levels):
        z = encode_level(params, k, z).mean
    out = predictor_forward(params, z)[:, 0]
    if cfg.task_kind == "binary_classification":
        return nx.sigmoid(out)
    return out


# losses


class LevelLoss(NamedTuple):
    kl: object
    det: object
    value: object  # kl + multiplier * det


def detector_loss(pred, target, kind: str):
    target = np.asarray(target, dtype=np.float64)
    pv = nx.value_of(pred)
    if target.shape != pv.shape:
        raise nx.DimensionError(f"detector target {target.shape} does not match prediction {pv.shape}")
    if kind == "continuous":
        return nx.mean(nx.sum_(nx.square(pred - target), axis=1))
    if kind == "categorical":
        onehot = np.isin(target, (0.0, 1.0)).all() and np.all(target.sum(axis=1) == 1.0)
        if not onehot:
            raise ValueError("categorical detector targets must be one-hot rows")
        return -nx.mean(nx.sum_(target * nx.log_softmax(pred), axis=1))
    raise ValueError(f"unknown detector kind {kind!r}")


def level_loss(out: LevelOutput, target, kind: str, multiplier: float) -> LevelLoss:
    kl = kl_std_normal(out.gaussian)
    det = detector_loss(out.detector_pred, target, kind)
    return LevelLoss(kl, det, kl + multiplier * det)


def overall_loss(level_values: Sequence, lambdas: Sequence[float]):
    """First level plus lambda-weighted subsequent levels."""
    if len(level_values) != len(lambdas) + 1:
        raise ValueError(f"{len(level_values)} level losses need {len(level_values) - 1} lambdas")
    total = level_values[0]
    for lam, value in zip(lambdas, level_values[1:]):
        total = total + lam * value
    return total


def total_loss(overall, task, cfg: ITHPConfig):
    return cfg.ib_scale * overall + cfg.alpha * task


def task_loss(pred, y, task_kind: str):
    """Binary cross-entropy on logits, or mean squared error for regression."""
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if task_kind == "binary_classification":
        return nx.mean(nx.softplus(pred) - y * pred)
    if task_kind == "regression":
        return nx.mean(nx.square(pred - y))
    raise ValueError(f"unknown task kind {task_kind!r}")


@dataclass
class LossBreakdown:
    kl_terms: list[float]
    detector_terms: list[float]
    level_terms: list[float]
    overall: float
    task_term: float
    total: float


def ithp_loss(cfg: ITHPConfig, params, modalities: Sequence[np.ndarray], y, noise):
    """Total training loss on one batch and its breakdown.

    ``modalities`` is the full list X0..XN for the batch; X1..XN only act as
    detector targets.
    """
    outputs = forward_chain(cfg, params, modalities[0], noise)
    levels = [
        level_loss(out, modalities[k + 1], cfg.detector_kinds[k], mult)
        for k, (out, mult) in enumerate(zip(outputs, cfg.multipliers))
    ]
    overall = overall_loss([lv.value for lv in levels], cfg.lambdas)
    task = task_loss(predictor_forward(params, outputs[-1].z), y, cfg.task_kind)
    total = total_loss(overall, task, cfg)
    breakdown = LossBreakdown(
        kl_terms=[float(lv.kl) for lv in levels],
        detector_terms=[float(lv.det) for lv in levels],
        level_terms=[float(lv.value) for lv in levels],
        overall=float(overall),
        task_term=float(task),
        total=float(total),
    )
    return total, breakdown


def sample_noise(cfg: ITHPConfig, rng: np.random.Generator, n: int) -> list[np.ndarray]:
    return [rng.standard_normal((n, d)) for d in cfg.latent_dims]
