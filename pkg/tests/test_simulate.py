import numpy as np
import pytest

from cggm.graph import DecomposableGraph, is_decomposable
from cggm.simulate import SimulationSpec, generate, random_decomposable_graph


def test_full_scale_preset():
    s = SimulationSpec.full_scale(seed=0)
    assert (s.n, s.p, s.q) == (700, 30, 40)
    assert [i + 1 for i in s.support] == [5, 11, 17, 24]
    assert s.effects == ("sin", "sin", "linear", "exp")


def test_shapes_and_truth():
    spec = SimulationSpec(n=50, p=6, q=4, support=(1, 3), effects=("sin", "exp"), target_edges=3, seed=1)
    d = generate(spec)
    assert d.X.shape == (50, 6) and d.Y.shape == (50, 4)
    assert np.all(np.abs(d.X) <= 1)
    assert d.true_gamma.tolist() == [False, True, False, True, False, False]
    assert d.graph.edge_count == 3
    assert np.all(d.coefficients > 0)
    assert np.allclose(d.mean, np.outer(np.sin(d.X[:, 1]), d.coefficients[0]) + np.outer(np.exp(d.X[:, 3]), d.coefficients[1]))
    K = np.linalg.inv(d.sigma)
    non = ~d.graph.adjacency & ~np.eye(4, dtype=bool)
    assert np.abs(K[non]).max(initial=0) < 1e-8 * np.abs(K).max()


def test_seed_is_bitwise_reproducible():
    spec = SimulationSpec(n=30, p=3, q=3, support=(0,), effects=("linear",), target_edges=2, seed=5)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.Y, b.Y) and np.array_equal(a.sigma, b.sigma) and a.graph == b.graph


def test_tiny_noise_gives_the_mean():
    spec = SimulationSpec(n=40, p=3, q=2, support=(0, 2), effects=("sin", "linear"),
                          graph=DecomposableGraph.empty(2), sigma=1e-6 * np.eye(2), seed=2)
    d = generate(spec)
    assert np.abs(d.Y - d.mean).max() < 1e-2
    # the residuals of a regression on the true terms are essentially zero
    F = np.column_stack([np.sin(d.X[:, 0]), d.X[:, 2]])
    coef = np.linalg.lstsq(F, d.Y, rcond=None)[0]
    assert np.abs(d.Y - F @ coef).max() < 1e-2


def test_residual_covariance_matches_sigma():
    g = DecomposableGraph(3, [(0, 1), (1, 2)])
    sigma = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]])
    spec = SimulationSpec(n=10_000, p=2, q=3, support=(0,), effects=("exp",), graph=g, sigma=sigma, seed=3)
    d = generate(spec)
    E = d.Y - d.mean
    C = np.cov(E.T, bias=True)
    se = np.sqrt((sigma ** 2 + np.outer(np.diag(sigma), np.diag(sigma))) / spec.n)
    assert np.all(np.abs(C - sigma) < 3.5 * se)


def test_random_signs_flag():
    spec = SimulationSpec(n=10, p=3, q=20, support=(0, 1), effects=("sin", "sin"), target_edges=0,
                          random_signs=True, seed=4)
    assert np.any(generate(spec).coefficients < 0)


def test_invalid_specs():
    with pytest.raises(ValueError):
        SimulationSpec(n=10, p=3, q=2, support=(3,), effects=("sin",))
    with pytest.raises(ValueError):
        SimulationSpec(n=10, p=3, q=2, support=(0,), effects=("cubic",))
    with pytest.raises(ValueError):
        SimulationSpec(n=10, p=3, q=2, support=(0, 0), effects=("sin", "sin"))


def test_random_graph_targets():
    rng = np.random.default_rng(0)
    assert random_decomposable_graph(5, 0, rng).edge_count == 0
    assert random_decomposable_graph(5, 10, rng) == DecomposableGraph.complete(5)
    with pytest.raises(ValueError):
        random_decomposable_graph(4, 7, rng)


def test_random_graphs_are_decomposable():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        q = int(rng.integers(2, 9))
        g = random_decomposable_graph(q, int(rng.integers(0, q * (q - 1) // 2 + 1)), rng)
        assert is_decomposable(g.adjacency)
