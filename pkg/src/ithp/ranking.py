"""Ordering modalities by information richness.

``sample_entropy`` adapts SampEn to feature matrices. It deliberately differs
from the classical time-series estimator: each template ``row[i:i+m]`` is only
compared with its immediate successor ``row[i+1:i+m+1]`` (Euclidean norm,
strict ``< r``), the (m+1)-length pair is only checked when the m-length pair
matched, and counts are pooled over all rows before the single log ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np


class RankingError(RuntimeError):
    pass


@dataclass
class RankedModalities:
    """``entries`` holds (modality, score) in ranked order."""

    entries: list[tuple[Hashable, float]]
    method: str

    @property
    def order(self) -> list:
        return [mid for mid, _ in self.entries]

    def to_records(self) -> list[dict]:
        return [
            {"modality": mid, "score": score if math.isfinite(score) else str(score), "method": self.method}
            for mid, score in self.entries
        ]


def _adjacent_match(x: np.ndarray, length: int, count: int, r: float) -> np.ndarray:
    """(rows, count) mask: ||x[:, i:i+length] - x[:, i+1:i+1+length]|| < r."""
    if count <= 0:
        return np.zeros((x.shape[0], 0), dtype=bool)
    diff = x[:, 1:] - x[:, :-1]
    sq = diff * diff
    # windows of `length` consecutive squared differences, one column per template
    d2 = np.lib.stride_tricks.sliding_window_view(sq, length, axis=1)[:, :count].sum(axis=2)
    return np.sqrt(d2) < r


def sample_entropy(data, m: int = 2, r_factor: float = 0.2) -> float:
    """Pooled adjacent-template SampEn of a (samples, features) matrix.

    Returns 0.0 for constant data and ``inf`` when either count is zero.
    """
    x = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n_feat = x.shape[1]
    if n_feat < m + 2:
        raise ValueError(f"need at least m + 2 = {m + 2} features, got {n_feat}")
    sd = x.std()
    if sd == 0:
        return 0.0
    r = r_factor * sd
    n_templates = n_feat - m
    b_mask = _adjacent_match(x, m, n_templates, r)
    # the (m+1)-length pair exists only for i < n_feat - m - 1
    a_mask = _adjacent_match(x, m + 1, n_templates - 1, r) & b_mask[:, : n_templates - 1]
    b, a = int(b_mask.sum()), int(a_mask.sum())
    if a == 0 or b == 0:
        return math.inf
    return -math.log(a / b)


def rank_by_sampen(modalities: Sequence, ids: Sequence | None = None, m: int = 2, r_factor: float = 0.2) -> RankedModalities:
    """Descending SampEn; equal scores keep input order."""
    ids = list(ids) if ids is not None else list(range(len(modalities)))
    scored = [(mid, sample_entropy(mat, m, r_factor)) for mid, mat in zip(ids, modalities)]
    # sorted() is stable, so ties stay in input order
    return RankedModalities(sorted(scored, key=lambda t: -t[1]), "sampen")


def greedy_rank(modalities: Sequence, evaluate: Callable[[frozenset], float]) -> RankedModalities:
    """Greedy submodular ordering; each entry's score is its marginal gain.

    Candidates are scanned in input order and only a strictly larger gain
    replaces the incumbent, so ties go to the earlier modality.
    """
    def score(subset):
        try:
            return float(evaluate(subset))
        except Exception as exc:
            raise RankingError(f"evaluate failed on subset {sorted(subset, key=str)}: {exc}") from exc

    chosen: set = set()
    entries: list[tuple[Hashable, float]] = []
    while len(chosen) < len(modalities):
        base = score(frozenset(chosen))
        best_gain, best = -math.inf, None
        for mod in modalities:
            if mod in chosen:
                continue
            gain = score(frozenset(chosen | {mod})) - base
            if gain > best_gain:
                best_gain, best = gain, mod
        if best is None:
            break
        chosen.add(best)
        entries.append((best, best_gain))
    return RankedModalities(entries, "greedy")
