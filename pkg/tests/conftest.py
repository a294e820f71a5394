import numpy as np
import pytest

from ithp import model as M


def small_config(dims=(6, 5, 4), latents=None, **kw):
    levels = len(dims) - 1
    latents = latents or [4, 3, 3, 2][:levels]
    kw.setdefault("hidden_dims", [5] * levels)
    kw.setdefault("beta", 4.0)
    kw.setdefault("gammas", [2.0] * (levels - 1))
    kw.setdefault("lambdas", [1.5] * (levels - 1))
    return M.ITHPConfig(modality_dims=list(dims), latent_dims=list(latents), **kw)


def random_batch(cfg, rng, n=4):
    mods = [rng.standard_normal((n, d)) for d in cfg.modality_dims]
    for k, kind in enumerate(cfg.detector_kinds):
        if kind == "categorical":
            d = cfg.modality_dims[k + 1]
            mods[k + 1] = np.eye(d)[rng.integers(0, d, n)]
    y = rng.integers(0, 2, n).astype(float)
    return mods, y


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
