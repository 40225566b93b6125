"""Parity between the compiled kernels and the pure-NumPy reference."""

import numpy as np
import pytest

import mixorder.backend
from mixorder import _purekernels as pure
from mixorder import Dataset, FitConfig, fit_mle

fast = pytest.importorskip(
    "mixorder._fastkernels", reason="compiled kernels not built")


def random_problem(seed, n=800, d=3, g=4, separated=False):
    rng = np.random.default_rng(seed)
    if separated:
        X = np.vstack([rng.normal(5.0 * z, 1.0, (n // g, d)) for z in range(g)])
    else:
        X = rng.standard_normal((n, d))
    means = rng.standard_normal((g, d)) * (4.0 if separated else 1.0)
    covs = np.stack([np.eye(d) + 0.4 * np.outer(v, v)
                     for v in rng.standard_normal((g, d))])
    weights = rng.dirichlet(np.ones(g))
    return X, weights, means, covs


def test_backend_name_is_known():
    assert mixorder.backend.BACKEND in ("compiled", "python")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_log_density_parity(seed):
    X, _, means, covs = random_problem(seed)
    a = pure.component_log_densities(X, means, covs)
    b = fast.component_log_densities(X, means, covs)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("seed,separated", [(0, False), (1, False), (2, True)])
def test_em_step_parity(seed, separated):
    X, w, means, covs = random_problem(seed, separated=separated)
    ll_a, w_a, m_a, c_a = pure.em_step(X, w, means, covs, 1e-6)
    ll_b, w_b, m_b, c_b = fast.em_step(X, w, means, covs, 1e-6)
    assert ll_a == pytest.approx(ll_b, rel=1e-12)
    np.testing.assert_allclose(w_a, w_b, atol=1e-12)
    np.testing.assert_allclose(m_a, m_b, atol=1e-9)
    np.testing.assert_allclose(c_a, c_b, atol=1e-9)


def test_non_spd_raises_same_error():
    X = np.zeros((4, 2))
    means = np.zeros((1, 2))
    covs = np.array([[[1.0, 2.0], [2.0, 1.0]]])
    with pytest.raises(np.linalg.LinAlgError):
        pure.component_log_densities(X, means, covs)
    with pytest.raises(np.linalg.LinAlgError):
        fast.component_log_densities(X, means, covs)


def test_full_fit_reaches_same_optimum(monkeypatch):
    rng = np.random.default_rng(5)
    rows = np.concatenate([rng.normal(-4, 1, 500), rng.normal(4, 1, 500)])
    data = Dataset(rows.reshape(-1, 1))
    cfg = FitConfig(seed=3)

    results = {}
    for impl in (pure, fast):
        monkeypatch.setattr(mixorder.backend, "em_step", impl.em_step)
        monkeypatch.setattr(mixorder.backend, "component_log_densities",
                            impl.component_log_densities)
        results[impl.BACKEND_NAME] = fit_mle(data, 2, cfg).log_likelihood
    assert results["python"] == pytest.approx(results["compiled"], rel=1e-6)
