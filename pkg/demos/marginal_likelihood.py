"""Collapsed marginal likelihood of (gamma, G) and how it ranks candidate models."""

import itertools

import numpy as np

from cggm.graph import DecomposableGraph
from cggm.likelihood import Hyperparameters, ModelData, log_marginal
from cggm.spline import build_basis, even_knots

rng = np.random.default_rng(1)
n = 80
X = rng.uniform(-1, 1, size=(n, 3))
sigma = np.array([[1.0, 0.6, 0.0], [0.6, 1.0, 0.4], [0.0, 0.4, 1.0]])
Y = np.outer(np.sin(3 * X[:, 1]), [1.0, 0.8, 0.5]) + rng.multivariate_normal(np.zeros(3), sigma, size=n)
Y -= Y.mean(axis=0)
data = ModelData(Y, build_basis(X - X.mean(axis=0), even_knots(3)))
h = Hyperparameters(g=float(n))

path = DecomposableGraph(3, [(0, 1), (1, 2)])
print("log f(Y | gamma, path graph) for every gamma:")
for bits in itertools.product([0, 1], repeat=3):
    gam = np.array(bits, dtype=bool)
    print(f"  gamma={bits}  {log_marginal(data, gam, path, h):10.3f}")

gam = np.array([0, 1, 0], dtype=bool)
for name, g in [("empty", DecomposableGraph.empty(3)), ("path", path), ("complete", DecomposableGraph.complete(3))]:
    print(f"graph {name:>8}: {log_marginal(data, gam, g, h):10.3f}")
