import math

import numpy as np
import pytest
from scipy.special import multigammaln

from cggm.errors import RankDeficientError
from cggm.graph import DecomposableGraph
from cggm.likelihood import (
    Hyperparameters,
    ModelData,
    log_marginal,
    log_marginal_ratio_gamma,
    log_marginal_ratio_graph,
    log_multigamma,
    log_normalizer,
    quad_form,
)
from cggm.simulate import random_decomposable_graph
from cggm.spline import build_basis, even_knots, select_columns

from oracles import dense_quad_form, log_marginal_dense


def make_data(n=20, p=3, q=3, k=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, p))
    Y = rng.normal(size=(n, q)) + np.sin(2 * X[:, [0]])
    return ModelData(Y, build_basis(X, even_knots(k)))


def test_hyperparameter_validation():
    Hyperparameters(g=1.0)
    for bad in [dict(g=0), dict(g=1, b=2), dict(g=1, d=0), dict(g=1, delta=1), dict(g=1, alpha_g=0)]:
        with pytest.raises(ValueError):
            Hyperparameters(**bad)


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_multigamma_matches_scipy(m):
    for a in [m / 2 + 0.1, 3.7, 40.25]:
        assert log_multigamma(a, m) == pytest.approx(multigammaln(a, m), rel=1e-13)


def test_quad_form_empty_gamma_is_yty():
    data = make_data()
    S = quad_form(data, np.zeros(3, dtype=bool), 5.0)
    assert np.allclose(S, data.Y.T @ data.Y)


def test_quad_form_small_g_limit():
    data = make_data()
    S = quad_form(data, np.array([1, 1, 0], dtype=bool), 1e-12)
    assert np.allclose(S, data.Y.T @ data.Y, rtol=1e-10)


def test_quad_form_matches_dense_projection():
    data = make_data(n=20, p=2, q=3)
    gam = np.array([1, 1], dtype=bool)
    S = quad_form(data, gam, 7.0)
    oracle = dense_quad_form(data.Y, select_columns(data.design, gam), 7.0)
    assert np.allclose(S, oracle, rtol=1e-10, atol=0)
    assert np.allclose(S, S.T)
    assert np.linalg.eigvalsh(S).min() >= -1e-10


def test_quad_form_cache_agrees_with_fresh():
    data = make_data()
    gam = np.array([0, 1, 1], dtype=bool)
    a = quad_form(data, gam, 3.0)
    b = quad_form(data, gam, 3.0, use_cache=False)
    assert np.array_equal(a, b)


def test_rank_deficiency_reports_gamma():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(15, 1))
    X = np.hstack([x, x])
    data = ModelData(rng.normal(size=(15, 2)), build_basis(X, [0.0]))
    gam = np.array([1, 1], dtype=bool)
    with pytest.raises(RankDeficientError) as info:
        quad_form(data, gam, 10.0)
    assert info.value.gamma.tolist() == [True, True]
    ridge = ModelData(data.Y, data.design, ridge=True)
    assert np.all(np.isfinite(quad_form(ridge, gam, 10.0)))


def test_single_node_closed_form():
    rng = np.random.default_rng(4)
    n, b, d = 9, 3.5, 0.8
    y = rng.normal(size=(n, 1))
    data = ModelData(y, build_basis(rng.uniform(-1, 1, size=(n, 1)), []))
    h = Hyperparameters(g=4.0, b=b, d=d)
    val = log_marginal(data, np.zeros(1, dtype=bool), DecomposableGraph.empty(1), h)
    yy = float(y[:, 0] @ y[:, 0])
    closed = (
        -n / 2 * math.log(2 * math.pi)
        + b / 2 * math.log(d)
        + n / 2 * math.log(2)
        + math.lgamma((b + n) / 2)
        - math.lgamma(b / 2)
        - (b + n) / 2 * math.log(d + yy)
    )
    assert val == pytest.approx(closed, rel=1e-12)


def test_log_marginal_matches_dense_oracle():
    data = make_data(n=25, p=3, q=4, k=2, seed=2)
    h = Hyperparameters(g=25.0, b=3.0, d=1.3)
    rng = np.random.default_rng(9)
    for _ in range(15):
        g = random_decomposable_graph(4, int(rng.integers(0, 7)), rng)
        gam = rng.random(3) < 0.5
        ours = log_marginal(data, gam, g, h)
        ref = log_marginal_dense(data.Y, select_columns(data.design, gam), g.adjacency, h.g, h.b, h.d)
        assert ours == pytest.approx(ref, abs=1e-9)


def test_complete_q2_is_single_clique():
    data = make_data(q=2)
    h = Hyperparameters(g=20.0)
    gam = np.array([1, 0, 0], dtype=bool)
    ref = log_marginal_dense(data.Y, select_columns(data.design, gam), np.ones((2, 2), bool), h.g, h.b, h.d)
    assert log_marginal(data, gam, DecomposableGraph.complete(2), h) == pytest.approx(ref, abs=1e-10)


def test_empty_graph_is_sum_of_single_nodes():
    data = make_data(q=3)
    h = Hyperparameters(g=20.0)
    gam = np.zeros(3, dtype=bool)
    total = log_marginal(data, gam, DecomposableGraph.empty(3), h)
    parts = sum(
        log_marginal(ModelData(data.Y[:, [j]], data.design), gam, DecomposableGraph.empty(1), h) for j in range(3)
    )
    assert total == pytest.approx(parts, abs=1e-10)


def test_normalizer_examples():
    h = Hyperparameters(g=1.0, b=3.2, d=0.6)
    n, q = 11, 4
    # K_q against a direct single-clique formula
    a0, a1 = (h.b + q - 1) / 2, (h.b + n + q - 1) / 2
    direct = (
        -n * q / 2 * math.log(2 * math.pi)
        + a0 * q * math.log(h.d)
        + n * q / 2 * math.log(2)
        - multigammaln(a0, q)
        + multigammaln(a1, q)
    )
    assert log_normalizer(n, DecomposableGraph.complete(q), h) == pytest.approx(direct, rel=1e-12)

    def piece(m):
        a0, a1 = (h.b + m - 1) / 2, (h.b + n + m - 1) / 2
        return a0 * m * math.log(h.d) + n * m / 2 * math.log(2) - multigammaln(a0, m) + multigammaln(a1, m)

    path = DecomposableGraph(3, [(0, 1), (1, 2)])
    ref = -n * 3 / 2 * math.log(2 * math.pi) + 2 * piece(2) - piece(1)
    assert log_normalizer(n, path, h) == pytest.approx(ref, abs=1e-10)


def test_normalizer_is_the_gamma_free_part():
    # log f - log M must equal the oracle's data terms for every gamma
    data = make_data()
    h = Hyperparameters(g=20.0)
    g = DecomposableGraph(3, [(0, 1)])
    M = log_normalizer(data.n, g, h)
    for code in range(8):
        gam = np.array([code >> i & 1 for i in range(3)], dtype=bool)
        ref = log_marginal_dense(data.Y, select_columns(data.design, gam), g.adjacency, h.g, h.b, h.d)
        assert log_marginal(data, gam, g, h) - M == pytest.approx(ref - M, abs=1e-9)


def test_gamma_ratio_properties():
    data = make_data(p=4, q=3)
    h = Hyperparameters(g=20.0)
    rng = np.random.default_rng(6)
    g = random_decomposable_graph(3, 2, rng)
    a = np.array([1, 0, 1, 0], dtype=bool)
    assert log_marginal_ratio_gamma(data, a, a.copy(), g, h) == 0.0
    for _ in range(20):
        x, y = rng.random(4) < 0.5, rng.random(4) < 0.5
        r = log_marginal_ratio_gamma(data, x, y, g, h)
        assert r == pytest.approx(-log_marginal_ratio_gamma(data, y, x, g, h), abs=1e-12)
        full = log_marginal(data, y, g, h) - log_marginal(data, x, g, h)
        assert r == pytest.approx(full, abs=1e-9)


def test_graph_ratio_against_full_recompute():
    rng = np.random.default_rng(8)
    q = 10
    Y = rng.normal(size=(30, q))
    X = rng.uniform(-1, 1, size=(30, 2))
    data = ModelData(Y, build_basis(X, even_knots(1)))
    h = Hyperparameters(g=30.0, b=3.0, d=1.0)
    gam = np.array([1, 0], dtype=bool)
    done = 0
    g = random_decomposable_graph(q, 12, rng)
    while done < 200:
        i, j = sorted(rng.choice(q, 2, replace=False).tolist())
        new = g.toggled(i, j)
        if new is None:
            continue
        r = log_marginal_ratio_graph(data, gam, g, new, h)
        full = log_marginal(data, gam, new, h, use_cache=False) - log_marginal(data, gam, g, h, use_cache=False)
        assert r == pytest.approx(full, abs=1e-8)
        g = new
        done += 1
    assert log_marginal_ratio_graph(data, gam, g, g, h) == 0.0


def test_q2_edge_toggle_ratio():
    data = make_data(q=2)
    h = Hyperparameters(g=20.0)
    gam = np.array([0, 1, 0], dtype=bool)
    e, k = DecomposableGraph.empty(2), DecomposableGraph.complete(2)
    r = log_marginal_ratio_graph(data, gam, e, k, h)
    assert r == pytest.approx(log_marginal(data, gam, k, h) - log_marginal(data, gam, e, h), abs=1e-10)


def test_orthogonal_extra_columns_are_penalised():
    # an extra predictor orthogonal to Y and to the selected design only pays the (g+1) penalty
    n = 16
    t = np.arange(n)
    x1 = np.where(t % 2 == 0, 1.0, -1.0)
    x2 = np.where((t // 2) % 2 == 0, 1.0, -1.0)
    X = np.column_stack([x1, x2])
    Y = np.outer(x1, [1.0, 0.5]) + np.outer(np.where((t // 4) % 2 == 0, 1.0, -1.0), [0.3, 0.2])
    data = ModelData(Y, build_basis(X, []))
    h = Hyperparameters(g=10.0)
    g = DecomposableGraph.complete(2)
    lo = log_marginal(data, np.array([1, 0], bool), g, h)
    hi = log_marginal(data, np.array([1, 1], bool), g, h)
    assert hi - lo == pytest.approx(-1 * 2 / 2 * math.log(11.0), abs=1e-10)
    assert hi < lo


def test_ordering_invariance():
    data = make_data(n=20, p=2, q=5, seed=3)
    h = Hyperparameters(g=20.0)
    gam = np.array([1, 0], dtype=bool)
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = random_decomposable_graph(5, 6, rng)
        perm = rng.permutation(5)
        Yp = data.Y[:, perm]
        inv = np.argsort(perm)
        gp = DecomposableGraph(5, [(inv[i], inv[j]) for i, j in g.edges])
        a = log_marginal(data, gam, g, h)
        b = log_marginal(ModelData(Yp, data.design), gam, gp, h)
        assert abs(a - b) < 1e-9
