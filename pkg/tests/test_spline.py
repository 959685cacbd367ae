import numpy as np
import pytest

from cggm.spline import SplineBasis, basis_functions, build_basis, even_knots, select_columns


def test_hinge_examples():
    U = build_basis(np.array([[0.5], [-0.5]]), [0.0])
    assert np.array_equal(U.values, [[0.5, 0.5], [-0.5, 0.0]])


def test_even_knots_on_unit_interval():
    w = even_knots(10)
    assert np.allclose(w, np.arange(-9, 10, 2) / 11)
    assert np.all(np.diff(w) > 0)


def test_knots_must_increase():
    with pytest.raises(ValueError):
        SplineBasis(np.array([0.0, 0.0]), 2)
    with pytest.raises(ValueError):
        build_basis(np.zeros((3, 2)), [0.5, 0.1])


def test_non_finite_rejected():
    X = np.zeros((3, 2))
    X[1, 1] = np.nan
    with pytest.raises(ValueError):
        build_basis(X, [0.0])


def test_layout_and_groups():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(8, 3))
    knots = [-0.3, 0.4]
    U = build_basis(X, knots)
    assert U.values.shape == (8, 9)
    for i in range(3):
        cols = U.column_groups[i]
        assert list(cols) == [i, 3 + i, 6 + i]
        assert np.array_equal(U.values[:, cols], basis_functions(X[:, i], knots))


def test_select_columns_edges():
    rng = np.random.default_rng(1)
    U = build_basis(rng.uniform(-1, 1, size=(6, 5)), [-0.5, 0.5])
    assert select_columns(U, np.zeros(5, dtype=bool)).shape == (6, 0)
    assert np.array_equal(select_columns(U, np.ones(5, dtype=bool)), U.values)
    e3 = np.zeros(5, dtype=bool)
    e3[2] = True
    single = build_basis(U.values[:, [2]], [-0.5, 0.5])
    assert np.array_equal(select_columns(U, e3), single.values)


def test_k_zero_is_linear():
    X = np.array([[0.1, -0.2], [0.3, 0.4]])
    U = build_basis(X, [])
    assert np.array_equal(U.values, X)


def test_monotone_in_x():
    x = np.linspace(-1, 1, 50)
    B = basis_functions(x, even_knots(4))
    assert np.all(np.diff(B, axis=0) >= 0)


def test_gram_is_psd():
    rng = np.random.default_rng(2)
    U = build_basis(rng.uniform(-1, 1, size=(40, 4)), even_knots(3))
    G = select_columns(U, np.array([1, 0, 1, 1], dtype=bool))
    M = G.T @ G
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0


def test_design_is_read_only():
    U = build_basis(np.zeros((2, 1)), [0.0])
    with pytest.raises(ValueError):
        U.values[0, 0] = 1.0
