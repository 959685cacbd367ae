"""Collapsed marginal likelihood ``f(Y | gamma, G)``.

With the g-prior on the coefficients and ``Sigma ~ HIW_G(b, d I)`` both
integrated out, the log marginal splits into a global part and one term per
clique and separator of the junction tree::

    log f = -(nq/2) log(2 pi) - (r q / 2) log(g + 1)
            + sum_C t(C) - sum_S t(S)

    t(A) = c(|A|) - (b + n + |A| - 1)/2 * log|d I_A + S_A(gamma)|

where ``r = p_gamma (k + 1)`` is the number of selected design columns and
``c(m)`` collects the d-, 2-power and multivariate-gamma factors of the
normalising constant. ``S(gamma) = Y^T (I - g/(g+1) P_gamma) Y``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve_triangular

from .errors import RankDeficientError
from .graph import DecomposableGraph, affected_components
from .spline import DesignMatrix

__all__ = [
    "Hyperparameters",
    "ModelData",
    "as_mask",
    "log_multigamma",
    "quad_form",
    "log_marginal",
    "log_normalizer",
    "log_marginal_ratio_gamma",
    "log_marginal_ratio_graph",
]

_LOG_2PI = math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)
_LOG_2 = math.log(2.0)


@dataclass(frozen=True)
class Hyperparameters:
    """Fixed hyperparameters of the hierarchical model and both proposals.

    ``b`` is the HIW degrees parameter in the clique-density convention
    where ``Sigma_C ~ IW(b, D_C)`` has conventional degrees ``b + |C| - 1``.
    """

    g: float
    b: float = 3.0
    d: float = 1.0
    delta: float = 0.5
    eta: float = 0.5
    alpha_g: float = 0.5

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if not self.b > 2:
            raise ValueError("b must exceed 2")
        if not self.d > 0:
            raise ValueError("d must be positive")
        for name in ("delta", "eta", "alpha_g"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def as_mask(gamma):
    """Boolean mask for an inclusion vector given as bits or an object with ``.mask``."""
    return np.asarray(getattr(gamma, "mask", gamma), dtype=bool)


class ModelData:
    """Responses ``Y`` (n x q) with their spline design and per-gamma caches.

    The caches make this object stateful; give each chain (thread, process)
    its own instance.

    Parameters
    ----------
    Y : array (n, q)
    design : DesignMatrix
    ridge : bool
        Opt in to adding ``eps I`` with ``eps = 1e-8 trace/dim`` to
        ``U_gamma^T U_gamma`` instead of failing on rank deficiency.
    """

    def __init__(self, Y, design: DesignMatrix, ridge=False):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2:
            raise ValueError("Y must be a matrix")
        if Y.shape[0] != design.n:
            raise ValueError(f"Y has {Y.shape[0]} rows but the design has {design.n}")
        if not np.all(np.isfinite(Y)):
            raise ValueError("Y contains non-finite entries")
        self.Y = Y
        self.design = design
        self.ridge = bool(ridge)
        U = design.values
        self.yty = Y.T @ Y
        self.utu = U.T @ U
        self.uty = U.T @ Y
        self._factor_cache = {}
        self._s_cache = {}
        self._term_cache = {}

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def q(self):
        return self.Y.shape[1]

    @property
    def p(self):
        return self.design.p

    @property
    def k(self):
        return self.design.k

    def clear_cache(self):
        self._factor_cache.clear()
        self._s_cache.clear()
        self._term_cache.clear()

    def factor(self, gamma):
        """``(cols, L)`` with ``L L^T = U_gamma^T U_gamma`` (lower Cholesky)."""
        mask = as_mask(gamma)
        key = mask.tobytes()
        hit = self._factor_cache.get(key)
        if hit is None:
            hit = self._factorize(mask)
            self._factor_cache[key] = hit
        return hit

    def _factorize(self, mask):
        cols = self.design.columns(mask)
        A = self.utu[np.ix_(cols, cols)]
        if self.ridge and cols.size:
            A = A + (1e-8 * np.trace(A) / cols.size) * np.eye(cols.size)
        try:
            L = cho_factor(A, lower=True, check_finite=False)[0]
        except LinAlgError:
            raise RankDeficientError(mask) from None
        L = np.tril(L)
        # cho_factor only fails on exact breakdown; near-singular pivots
        # would silently blow up S(gamma).
        diag = np.diag(L)
        if cols.size and diag.min() <= 1e-7 * diag.max():
            raise RankDeficientError(mask)
        return cols, L


def log_multigamma(a, m):
    """``log Gamma_m(a) = m(m-1)/4 log(pi) + sum_j log Gamma(a + (1 - j)/2)``."""
    return 0.25 * m * (m - 1) * _LOG_PI + math.fsum(math.lgamma(a + 0.5 * (1 - j)) for j in range(1, m + 1))


def _compute_quad_form(data, mask, g, fresh=False):
    if not mask.any():
        return data.yty.copy()
    cols, L = data._factorize(mask) if fresh else data.factor(mask)
    Z = solve_triangular(L, data.uty[cols], lower=True, check_finite=False)
    S = data.yty - (g / (g + 1.0)) * (Z.T @ Z)
    return 0.5 * (S + S.T)


def quad_form(data: ModelData, gamma, g, use_cache=True):
    """``S(gamma) = Y^T Y - g/(g+1) (U_g^T Y)^T (U_g^T U_g)^{-1} (U_g^T Y)``.

    Raises ``RankDeficientError`` when ``U_gamma`` is column-rank deficient.
    A cached result is read-only and shared; ``use_cache=False`` bypasses
    every cache and returns a fresh array.
    """
    mask = as_mask(gamma)
    if not use_cache:
        return _compute_quad_form(data, mask, g, fresh=True)
    key = (mask.tobytes(), float(g))
    S = data._s_cache.get(key)
    if S is None:
        S = _compute_quad_form(data, mask, g)
        S.setflags(write=False)
        data._s_cache[key] = S
    return S


def _chol_logdet(M):
    try:
        L = cho_factor(M, lower=True, check_finite=False)[0]
    except LinAlgError:
        try:
            L = cho_factor(0.5 * (M + M.T), lower=True, check_finite=False)[0]
        except LinAlgError:
            raise np.linalg.LinAlgError("clique matrix d I + S_C is not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


@lru_cache(maxsize=4096)
def _component_norm(m, n, b, d):
    """``log`` of one clique's factor in the normalising constant."""
    if m == 0:
        return 0.0
    a0 = 0.5 * (b + m - 1)
    an = 0.5 * (b + n + m - 1)
    return a0 * m * math.log(d) + 0.5 * n * m * _LOG_2 - log_multigamma(a0, m) + log_multigamma(an, m)


def _component_data_term(data, mask, nodes, hyper, use_cache=True):
    """``-(b + n + |A| - 1)/2 log|d I_A + S_A(gamma)|`` for node set ``A``."""
    m = len(nodes)
    if m == 0:
        return 0.0
    key = (mask.tobytes(), nodes, hyper.g, hyper.b, hyper.d)
    if use_cache:
        hit = data._term_cache.get(key)
        if hit is not None:
            return hit
    S = quad_form(data, mask, hyper.g, use_cache=use_cache)
    idx = sorted(nodes)
    block = S[np.ix_(idx, idx)].copy()
    block[np.diag_indices(m)] += hyper.d
    val = -0.5 * (hyper.b + data.n + m - 1) * _chol_logdet(block)
    if use_cache:
        data._term_cache[key] = val
    return val


def _gamma_part(data, mask, tree, hyper, use_cache=True):
    """Everything in ``log f`` that depends on gamma."""
    r = int(mask.sum()) * (data.k + 1)
    total = -0.5 * r * data.q * math.log1p(hyper.g)
    for c in tree.cliques:
        total += _component_data_term(data, mask, c, hyper, use_cache)
    for s in tree.separators:
        total -= _component_data_term(data, mask, s, hyper, use_cache)
    return total


def _tree_of(graph):
    if not isinstance(graph, DecomposableGraph):
        graph = DecomposableGraph.from_adjacency(graph)
    return graph, graph._tree


def log_normalizer(n, graph, hyper):
    """``log M_{n,G}``; depends on ``n``, the graph and ``b, d`` only."""
    graph, tree = _tree_of(graph)
    q = graph.node_count
    total = -0.5 * n * q * _LOG_2PI
    for c in tree.cliques:
        total += _component_norm(len(c), n, hyper.b, hyper.d)
    for s in tree.separators:
        total -= _component_norm(len(s), n, hyper.b, hyper.d)
    return total


def log_marginal(data: ModelData, gamma, graph, hyper: Hyperparameters, use_cache=True):
    """Exact ``log f(Y | gamma, G)`` with B and Sigma integrated out."""
    graph, tree = _tree_of(graph)
    if graph.node_count != data.q:
        raise ValueError("graph node count does not match the number of responses")
    mask = as_mask(gamma)
    return log_normalizer(data.n, graph, hyper) + _gamma_part(data, mask, tree, hyper, use_cache)


def log_marginal_ratio_gamma(data, gamma, gamma_new, graph, hyper):
    """``log f(Y|gamma_new, G) - log f(Y|gamma, G)``; ``M_{n,G}`` never formed."""
    graph, tree = _tree_of(graph)
    a, b = as_mask(gamma), as_mask(gamma_new)
    if a.tobytes() == b.tobytes():
        return 0.0
    return _gamma_part(data, b, tree, hyper) - _gamma_part(data, a, tree, hyper)


def log_marginal_ratio_graph(data, gamma, graph, graph_new, hyper):
    """``log f(Y|gamma, G_new) - log f(Y|gamma, G)`` for a single-edge change.

    Only cliques and separators that differ between the two junction trees
    are evaluated.
    """
    graph, _ = _tree_of(graph)
    graph_new, _ = _tree_of(graph_new)
    if graph.edges == graph_new.edges:
        return 0.0
    diff = affected_components(graph, graph_new)
    return _diff_value(data, as_mask(gamma), diff, hyper)


def _diff_value(data, mask, diff, hyper):
    n, b, d = data.n, hyper.b, hyper.d

    def term(nodes):
        return _component_norm(len(nodes), n, b, d) + _component_data_term(data, mask, nodes, hyper)

    total = 0.0
    for c, k in diff.new_cliques.items():
        total += k * term(c)
    for s, k in diff.new_separators.items():
        total -= k * term(s)
    for c, k in diff.old_cliques.items():
        total -= k * term(c)
    for s, k in diff.old_separators.items():
        total += k * term(s)
    return total
