"""Diagonal-Gaussian latent states against a standard-normal prior."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx

# log-variance is clamped to this symmetric range right after encoding
LOG_VAR_BOUND = 10.0


@dataclass
class DiagGaussian:
    """Per-sample mean and log-variance, both shaped (batch, dim).

    Either field may be a plain array or a tape node. One-dimensional arrays
    are read as a batch holding a single sample.
    """

    mean: object
    log_var: object

    def __post_init__(self):
        if not isinstance(self.mean, nx.Var):
            self.mean = np.atleast_2d(np.asarray(self.mean, dtype=np.float64))
        if not isinstance(self.log_var, nx.Var):
            self.log_var = np.atleast_2d(np.asarray(self.log_var, dtype=np.float64))
        if nx.value_of(self.mean).shape != nx.value_of(self.log_var).shape:
            raise nx.DimensionError(
                f"mean {nx.value_of(self.mean).shape} and log_var "
                f"{nx.value_of(self.log_var).shape} differ in shape"
            )

    @property
    def dim(self) -> int:
        return nx.value_of(self.mean).shape[1]

    @property
    def batch(self) -> int:
        return nx.value_of(self.mean).shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.exp(0.5 * nx.value_of(self.log_var))


def kl_std_normal(g: DiagGaussian):
    """KL(g || N(0, I)) summed over latent dims and averaged over the batch."""
    per_dim = nx.square(g.mean) + nx.exp(g.log_var) - g.log_var - 1.0
    return 0.5 * nx.mean(nx.sum_(per_dim, axis=1))


def reparameterize(g: DiagGaussian, eps):
    """z = mean + eps * exp(log_var / 2)."""
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    if eps.shape != nx.value_of(g.mean).shape:
        raise nx.DimensionError(f"noise shape {eps.shape} does not match latent {nx.value_of(g.mean).shape}")
    return g.mean + eps * nx.exp(0.5 * g.log_var)


def draw_noise(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.standard_normal((n, dim))
