"""Reference computations that share no code path with the implementation.

Used by the test suite to pin expected values: central finite differences,
Monte-Carlo KL, discrete mutual information, naive SampEn counting, and grid
integrals of the variational bounds for a one-dimensional toy channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np


def finite_diff(loss_fn: Callable[[dict], float], params: Mapping[str, np.ndarray], h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of ``loss_fn`` at ``params``, entry by entry."""
    base = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    grads = {}
    for name, arr in base.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(loss_fn(base))
            flat[i] = orig - h
            down = float(loss_fn(base))
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def mc_kl(mean, log_var, n_draws: int, rng: np.random.Generator) -> float:
    """Monte-Carlo KL(N(mean, diag(exp(log_var))) || N(0, I)) for a single sample."""
    mean = np.asarray(mean, dtype=np.float64).ravel()
    log_var = np.asarray(log_var, dtype=np.float64).ravel()
    std = np.exp(0.5 * log_var)
    eps = rng.standard_normal((n_draws, mean.size))
    z = mean + std * eps
    # log q(z) - log p(z); the 2*pi terms cancel
    log_q = -0.5 * np.sum(eps**2 + log_var, axis=1)
    log_p = -0.5 * np.sum(z**2, axis=1)
    return float(np.mean(log_q - log_p))


@dataclass
class DiscreteJoint:
    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if np.any(self.table < 0) or abs(self.table.sum() - 1.0) > 1e-12:
            raise ValueError("joint table must be non-negative and sum to 1")


def discrete_mi(j: DiscreteJoint) -> float:
    """I(X;Y) in nats."""
    p = j.table
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    total = 0.0
    for a in range(p.shape[0]):
        for b in range(p.shape[1]):
            if p[a, b] > 0:
                total += p[a, b] * math.log(p[a, b] / (px[a] * py[b]))
    return total


def naive_sample_entropy(data, m: int = 2, r_factor: float = 0.2) -> float:
    """Loop-for-loop adjacent-template SampEn, with the same conventions."""
    rows = np.atleast_2d(np.asarray(data, dtype=np.float64))
    sd = float(np.std(rows))
    if sd == 0.0:
        return 0.0
    r = r_factor * sd
    n_feat = rows.shape[1]
    b = a = 0
    for row in rows:
        for i in range(n_feat - m):
            d = row[i : i + m] - row[i + 1 : i + m + 1]
            if math.sqrt(sum(v * v for v in d)) < r:
                b += 1
                if i < n_feat - m - 1:
                    d = row[i : i + m + 1] - row[i + 1 : i + m + 2]
                    if math.sqrt(sum(v * v for v in d)) < r:
                        a += 1
    if a == 0 or b == 0:
        return math.inf
    return -math.log(a / b)


# toy channel bounds: X0 uniform on {0, 1}, B0 | X0=x ~ N(mu[x], sigma[x]^2)

GRID = (-20.0, 20.0, 40001)


def _normal_pdf(b, mu, sigma):
    return np.exp(-0.5 * ((b - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def _grid(grid):
    lo, hi, n = grid
    return np.linspace(lo, hi, int(n))


def _integrate(values, b):
    return float(np.trapezoid(values, b)) if hasattr(np, "trapezoid") else float(np.trapz(values, b))


def channel_mi(mus, sigmas, grid=GRID) -> float:
    """Grid-integrated I(X0; B0) for the binary toy channel."""
    b = _grid(grid)
    dens = [_normal_pdf(b, mu, s) for mu, s in zip(mus, sigmas)]
    marginal = 0.5 * (dens[0] + dens[1])
    total = 0.0
    for d in dens:
        integrand = np.where(d > 0, d * np.log(np.where(d > 0, d, 1.0) / np.where(marginal > 0, marginal, 1.0)), 0.0)
        total += 0.5 * _integrate(integrand, b)
    return total


def bound_check_level0(mus, sigmas, grid=GRID) -> tuple[float, float]:
    """(grid I(X0;B0), E_x KL(q(B0|x) || N(0,1))) for the toy channel.

    The average KL is an upper bound on the mutual information.
    """
    mi = channel_mi(mus, sigmas, grid)
    avg_kl = float(np.mean([0.5 * (mu**2 + s**2 - 2 * math.log(s) - 1) for mu, s in zip(mus, sigmas)]))
    return mi, avg_kl


def decoder_bound_check(mus, sigmas, flip: float, w: float, c: float, grid=GRID) -> tuple[float, float]:
    """Decoder-side bound for X1 = X0 flipped with probability ``flip``.

    The decoder is q(X1=1 | b) = sigmoid(w*b + c). Returns
    ``(E[log q(X1|B0)] + H(X1), I(B0; X1))``; the first never exceeds the second.
    """
    b = _grid(grid)
    dens = [_normal_pdf(b, mu, s) for mu, s in zip(mus, sigmas)]
    # p(b, x1) = sum_x0 p(x0) p(x1|x0) p(b|x0)
    joint = [
        0.5 * ((1 - flip) * dens[0] + flip * dens[1]),
        0.5 * (flip * dens[0] + (1 - flip) * dens[1]),
    ]
    logit = w * b + c
    log_q = [-np.logaddexp(0.0, logit), -np.logaddexp(0.0, -logit)]
    expected = sum(_integrate(joint[x] * log_q[x], b) for x in (0, 1))
    p1 = [_integrate(joint[x], b) for x in (0, 1)]
    entropy = -sum(p * math.log(p) for p in p1 if p > 0)
    marginal = joint[0] + joint[1]
    mi = 0.0
    for x in (0, 1):
        safe = np.where(joint[x] > 0, joint[x], 1.0)
        ratio = safe / (np.where(marginal > 0, marginal, 1.0) * p1[x])
        mi += _integrate(np.where(joint[x] > 0, joint[x] * np.log(ratio), 0.0), b)
    return expected + entropy, mi


def forward_oracle(x, w1, b1, w_mu, b_mu, w_lv, b_lv, bound: float = 10.0):
    """Row-by-row two-layer encoder forward pass written with plain loops."""
    x = np.asarray(x, dtype=np.float64)
    means, log_vars = [], []
    for row in x:
        hidden = [max(0.0, sum(w1[j, i] * row[i] for i in range(row.size)) + b1[j]) for j in range(w1.shape[0])]
        means.append([sum(w_mu[j, i] * hidden[i] for i in range(len(hidden))) + b_mu[j] for j in range(w_mu.shape[0])])
        log_vars.append(
            [
                min(bound, max(-bound, sum(w_lv[j, i] * hidden[i] for i in range(len(hidden))) + b_lv[j]))
                for j in range(w_lv.shape[0])
            ]
        )
    return np.array(means), np.array(log_vars)
