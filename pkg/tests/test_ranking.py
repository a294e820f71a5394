import itertools
import math

import numpy as np
import pytest

from ithp.oracle import naive_sample_entropy
from ithp.ranking import RankingError, greedy_rank, rank_by_sampen, sample_entropy


def test_sampen_constant_is_zero():
    assert sample_entropy(np.full((3, 6), 2.5)) == 0.0


def test_sampen_linear_row_is_inf():
    assert sample_entropy(np.array([[1.0, 2, 3, 4, 5, 6]])) == math.inf


def test_sampen_matches_naive_counting():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 10))
    assert sample_entropy(x) == naive_sample_entropy(x)


def test_sampen_hand_count():
    # one row; r = 0.2 * std. Adjacent 2-templates: (0,0)->(0,0) match,
    # (0,0)->(0,5) no, (0,5)->(5,5) no, (5,5)->(5,5) match; the first match
    # extends ((0,0,0) vs (0,0,5) fails), the last has no extension
    row = np.array([[0.0, 0.0, 0.0, 5.0, 5.0, 5.0]])
    assert naive_sample_entropy(row) == math.inf
    row = np.array([[0.0, 0.0, 0.0, 0.0, 5.0, 5.0]])
    # B: i=0 (00,00) i=1 (00,00) i=3 (05,55)? no -> B=2; A: i=0 (000,000) yes, i=1 (000,005) no
    assert sample_entropy(row) == pytest.approx(-math.log(1 / 2), abs=1e-15)


def test_sampen_shift_invariant():
    rng = np.random.default_rng(4)
    x = np.round(rng.standard_normal((20, 8)), 3)
    # shifting by a power of two keeps every difference exact
    assert sample_entropy(x + 64.0) == sample_entropy(x)


def test_sampen_too_few_features():
    with pytest.raises(ValueError):
        sample_entropy(np.ones((2, 3)))


def test_rank_by_sampen_cases():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 8))
    assert rank_by_sampen([x], ["only"]).order == ["only"]
    assert rank_by_sampen([np.ones((30, 8)), x], ["const", "rand"]).order == ["rand", "const"]
    assert rank_by_sampen([x, x.copy(), np.ones((30, 8))], ["a", "b", "c"]).order == ["a", "b", "c"]
    r = rank_by_sampen([x], ["a"])
    assert r.method == "sampen" and r.to_records()[0]["modality"] == "a"


def test_inf_serialised_as_string():
    r = rank_by_sampen([np.array([[1.0, 2, 3, 4, 5, 6]])], ["a"])
    assert r.to_records()[0]["score"] == "inf"


def test_greedy_modular():
    w = {"A": 3.0, "B": 2.0, "C": 1.0}
    r = greedy_rank(["C", "A", "B"], lambda s: sum(w[m] for m in s))
    assert r.order == ["A", "B", "C"]
    assert [s for _, s in r.entries] == [3.0, 2.0, 1.0]
    assert greedy_rank(["x"], lambda s: len(s)).order == ["x"]


def test_greedy_ties_go_to_earlier():
    assert greedy_rank(["p", "q", "r"], lambda s: float(len(s))).order == ["p", "q", "r"]


def test_greedy_error_names_subset():
    def bad(s):
        if "b" in s:
            raise ZeroDivisionError("boom")
        return 0.0

    with pytest.raises(RankingError, match=r"\['b'\]"):
        greedy_rank(["a", "b"], bad)


def coverage(seed, n_mods=4, universe=12):
    rng = np.random.default_rng(seed)
    sets = {m: set(np.nonzero(rng.random(universe) < 0.35)[0]) for m in range(n_mods)}
    weights = rng.random(universe)

    def f(subset):
        covered = set().union(*(sets[m] for m in subset)) if subset else set()
        return float(sum(weights[i] for i in covered))

    return f


def test_greedy_near_optimal_on_coverage():
    for seed in range(20):
        f = coverage(seed)
        r = greedy_rank(list(range(4)), f)
        assert len(set(r.order)) == 4
        for k in range(1, 5):
            best = max(f(frozenset(c)) for c in itertools.combinations(range(4), k))
            assert f(frozenset(r.order[:k])) >= (1 - 1 / math.e) * best - 1e-12
