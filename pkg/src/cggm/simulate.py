"""Synthetic data with a planted sparse nonlinear mean and a decomposable graph.

``Y = F(X) + E`` where ``X_ij ~ U(-1, 1)``, row ``i`` of ``F`` is
``sum_s h_{js} phi_s(x_{i, a_s})`` over the true predictors ``a_s`` with
effect shapes ``phi_s`` in {sin, linear, exp} and ``h ~ Exp(1)``, and the
rows of ``E`` are ``N_q(0, Sigma)`` with ``Sigma ~ HIW_G(3, I)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DecomposableGraph, index_pair
from .hiw import HIWParams, sample_hiw_batch

__all__ = ["EFFECTS", "SimulationSpec", "SimulatedData", "generate", "random_decomposable_graph"]

EFFECTS = {
    "sin": np.sin,
    "linear": lambda x: x,
    "exp": np.exp,
}


@dataclass(frozen=True)
class SimulationSpec:
    """Sizes and ground truth of a synthetic dataset (0-based predictor indices).

    ``graph`` may be a ``DecomposableGraph`` or ``None`` for a random
    decomposable graph with ``target_edges`` edges. ``sigma`` fixes the
    noise covariance instead of drawing it from ``HIW_G(hiw_b, hiw_scale I)``.
    """

    n: int
    p: int
    q: int
    support: tuple
    effects: tuple
    graph: DecomposableGraph | None = None
    target_edges: int | None = None
    hiw_b: float = 3.0
    hiw_scale: float = 1.0
    sigma: np.ndarray | None = None
    random_signs: bool = False
    seed: int | None = None

    def __post_init__(self):
        if len(self.support) != len(self.effects):
            raise ValueError("support and effects must have equal length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support has repeated predictors")
        if any(not 0 <= s < self.p for s in self.support):
            raise ValueError("support index out of range")
        unknown = set(self.effects) - set(EFFECTS)
        if unknown:
            raise ValueError(f"unknown effect kinds {sorted(unknown)}")
        if self.graph is not None and self.graph.node_count != self.q:
            raise ValueError("graph node count must equal q")

    @classmethod
    def full_scale(cls, seed=None, target_edges=None):
        """p=30, q=40, n=700; predictors 5, 11, 17, 24 (1-based) with sin, sin, linear, exp."""
        return cls(
            n=700,
            p=30,
            q=40,
            support=(4, 10, 16, 23),
            effects=("sin", "sin", "linear", "exp"),
            target_edges=40 if target_edges is None else target_edges,
            seed=seed,
        )


@dataclass
class SimulatedData:
    X: np.ndarray
    Y: np.ndarray
    support: tuple
    graph: DecomposableGraph
    sigma: np.ndarray
    mean: np.ndarray
    coefficients: np.ndarray

    @property
    def true_gamma(self):
        g = np.zeros(self.X.shape[1], dtype=bool)
        g[list(self.support)] = True
        return g


def random_decomposable_graph(q, target_edges, rng):
    """Grow a chordal graph from empty by random chordality-preserving additions.

    Stops at ``target_edges`` edges or when no further edge can be added.
    """
    n_pairs = q * (q - 1) // 2
    if not 0 <= target_edges <= n_pairs:
        raise ValueError(f"target_edges must be in [0, {n_pairs}]")
    g = DecomposableGraph.empty(q)
    while g.edge_count < target_edges:
        candidates = [k for k in rng.permutation(n_pairs).tolist() if not g.has_edge(*index_pair(k, q))]
        for k in candidates:
            new = g.toggled(*index_pair(k, q))
            if new is not None:
                g = new
                break
        else:
            break
    return g


def generate(spec: SimulationSpec, rng=None) -> SimulatedData:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n, p, q = spec.n, spec.p, spec.q
    if spec.graph is not None:
        graph = spec.graph
    else:
        target = q if spec.target_edges is None else spec.target_edges
        graph = random_decomposable_graph(q, target, rng)
    if spec.sigma is not None:
        sigma = np.asarray(spec.sigma, dtype=float)
        if sigma.shape != (q, q):
            raise ValueError("sigma must be q x q")
    else:
        sigma = sample_hiw_batch(HIWParams(spec.hiw_b, spec.hiw_scale * np.eye(q), graph), rng, 1)[0]
    X = rng.uniform(-1.0, 1.0, size=(n, p))
    h = rng.exponential(1.0, size=(len(spec.support), q))
    if spec.random_signs:
        h *= rng.choice([-1.0, 1.0], size=h.shape)
    F = np.zeros((n, q))
    for s, (col, kind) in enumerate(zip(spec.support, spec.effects)):
        F += np.outer(EFFECTS[kind](X[:, col]), h[s])
    E = rng.multivariate_normal(np.zeros(q), sigma, size=n, method="cholesky")
    return SimulatedData(
        X=X,
        Y=F + E,
        support=tuple(spec.support),
        graph=graph,
        sigma=sigma,
        mean=F,
        coefficients=h,
    )
