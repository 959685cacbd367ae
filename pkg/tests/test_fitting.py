import numpy as np
import pytest

from cggm.fitting import chain_seeds, default_hyperparameters, make_data, preprocess, run_chains
from cggm.sampler import Schedule


def test_preprocess_modes():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, size=(50, 3))
    Y = rng.normal(1.0, 1.0, size=(50, 2))
    Xz, Yc = preprocess(X, Y)
    assert np.allclose(Xz.mean(axis=0), 0) and np.allclose(Xz.std(axis=0), 1)
    assert np.allclose(Yc.mean(axis=0), 0)
    Xc, Yr = preprocess(X, Y, standardize="center", center_y=False)
    assert np.allclose(Xc.std(axis=0), X.std(axis=0)) and np.array_equal(Yr, Y)
    with pytest.raises(ValueError):
        preprocess(X, Y[:10])
    with pytest.raises(ValueError):
        preprocess(np.ones((5, 2)), np.zeros((5, 1)))


def test_default_knots_span_pooled_range():
    X = np.array([[-2.0, 0.5], [1.0, 3.0]])
    data = make_data(X, np.zeros((2, 1)), n_knots=3)
    assert np.allclose(data.design.basis.knots, [-0.75, 0.5, 1.75])


def test_default_hyperparameters(caplog):
    h = default_hyperparameters(100, 5, 41)
    assert h.g == 100 and h.b == 3 and h.d == 1 and h.alpha_g == pytest.approx(0.05)
    assert default_hyperparameters(100, 30, 5, g_rule="max_n_p2").g == 900
    with caplog.at_level("WARNING"):
        h = default_hyperparameters(10, 2, 3)
    assert h.alpha_g == 0.5 and "alpha_G" in caplog.text
    assert default_hyperparameters(10, 2, 3, alpha_g=0.2).alpha_g == 0.2


def test_chain_seeds_are_distinct_and_stable():
    a = chain_seeds(7, 4)
    assert a == chain_seeds(7, 4) and len(set(a)) == 4


def test_parallel_equals_serial(monkeypatch):
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, size=(40, 3))
    Y = rng.normal(size=(40, 3)) + np.sin(2 * X[:, [1]])
    h = default_hyperparameters(40, 3, 3)
    s = Schedule(iterations=300, burn_in=50, seed=11)
    serial = run_chains(X, Y, [0.0], h, s, chains=2, workers=1)
    monkeypatch.setenv("CGGM_THREADS", "2")
    parallel = run_chains(X, Y, [0.0], h, s, chains=2)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.gamma, b.gamma) and np.array_equal(a.edges, b.edges)
    assert not np.array_equal(serial[0].edges, serial[1].edges)
