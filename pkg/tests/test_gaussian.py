import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ithp import numerics as nx
from ithp.gaussian import DiagGaussian, draw_noise, kl_std_normal, reparameterize
from ithp.oracle import finite_diff, mc_kl


def test_kl_closed_forms():
    assert kl_std_normal(DiagGaussian(np.zeros(3), np.zeros(3))) == 0.0
    assert kl_std_normal(DiagGaussian([1.0], [0.0])) == 0.5
    assert kl_std_normal(DiagGaussian([0.0], [1.0])) == pytest.approx(0.5 * (math.e - 2), abs=1e-15)


def test_kl_log_var_one_matches_monte_carlo():
    rng = np.random.default_rng(0)
    assert abs(mc_kl([0.0], [1.0], 10**6, rng) - 0.359141) < 1e-2


def test_kl_batch_averaged():
    g = DiagGaussian(np.array([[1.0], [0.0]]), np.zeros((2, 1)))
    assert kl_std_normal(g) == 0.25


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (2, 3), elements=finite), arrays(np.float64, (2, 3), elements=finite))
def test_kl_nonnegative(mu, lv):
    kl = kl_std_normal(DiagGaussian(mu, lv))
    assert kl >= 0.0
    # zero only at the prior, up to rounding of exp(lv) - lv - 1 near 0
    if max(np.abs(mu).max(), np.abs(lv).max()) > 1e-4:
        assert kl > 1e-12
    else:
        assert kl < 1e-7


def test_kl_gradient(rng):
    params = {"mu": rng.standard_normal((3, 2)), "lv": rng.uniform(-1, 1, (3, 2))}

    def f(p):
        return kl_std_normal(DiagGaussian(p["mu"], p["lv"]))

    analytic = nx.reverse_gradients(f, params)
    numeric = finite_diff(lambda p: float(f(p)), params)
    for k in params:
        assert np.allclose(analytic[k], numeric[k], rtol=1e-6, atol=1e-9)


def test_reparameterize_examples():
    assert np.array_equal(reparameterize(DiagGaussian([0.3, -1.0], [0.2, 0.1]), np.zeros(2)), [[0.3, -1.0]])
    assert np.array_equal(reparameterize(DiagGaussian([0.0], [0.0]), np.array([1.7])), [[1.7]])
    assert reparameterize(DiagGaussian([1.0], [math.log(4.0)]), np.array([0.5]))[0, 0] == pytest.approx(2.0, abs=1e-15)


def test_reparameterize_dim_mismatch():
    with pytest.raises(nx.DimensionError):
        reparameterize(DiagGaussian([0.0, 0.0], [0.0, 0.0]), np.zeros(3))


def test_mismatched_gaussian_rejected():
    with pytest.raises(nx.DimensionError):
        DiagGaussian(np.zeros(2), np.zeros(3))


def test_draw_noise_seeded_and_moments():
    a = draw_noise(np.random.default_rng(5), 4, 3)
    b = draw_noise(np.random.default_rng(5), 4, 3)
    assert np.array_equal(a, b)
    big = draw_noise(np.random.default_rng(6), 100_000, 1)
    assert abs(big.mean()) < 0.02
    assert abs(big.var() - 1.0) < 0.03
