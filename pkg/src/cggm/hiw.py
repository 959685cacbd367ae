"""Hyper-inverse Wishart draws and related conditional samplers.

Parameterisation: ``Sigma_C ~ IW(b, D_C)`` has density proportional to
``|Sigma_C|^{-(b + 2|C|)/2} etr(-Sigma_C^{-1} D_C / 2)``, i.e. a conventional
inverse Wishart with ``b + |C| - 1`` degrees of freedom and mean
``D_C / (b - 2)``. Conversion to conventional degrees happens only in
``_sample_iw``.

A HIW draw is built along the junction tree. The first clique is an
inverse-Wishart draw; each later clique ``C = S + R`` keeps the already
drawn separator block ``Sigma_SS``, draws ``Sigma_{R.S}`` and the regression
``A = Sigma_SS^{-1} Sigma_SR`` from their exact conditionals and fills the
cross-covariance with the rest of the graph so that the precision is zero
off the edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .graph import DecomposableGraph, junction_tree
from .likelihood import ModelData, as_mask, quad_form

__all__ = [
    "HIWParams",
    "CovarianceDraw",
    "sample_hiw",
    "sample_hiw_batch",
    "sample_posterior_sigma",
    "sample_posterior_B",
    "mle_precision",
    "clique_combined_inverse",
]


@dataclass(frozen=True)
class HIWParams:
    b: float
    D: np.ndarray
    graph: DecomposableGraph

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        q = self.graph.node_count
        if D.shape != (q, q):
            raise ValueError(f"D must be {q} x {q}")
        if not np.allclose(D, D.T, rtol=1e-12, atol=1e-12 * np.abs(D).max()):
            raise ValueError("D must be symmetric")
        if not self.b > 0:
            raise ValueError("b must be positive")
        _chol(D)
        object.__setattr__(self, "D", 0.5 * (D + D.T))


@dataclass(frozen=True)
class CovarianceDraw:
    sigma: np.ndarray
    precision: np.ndarray


def _chol(M):
    """Lower Cholesky factor; one retry on the symmetrised matrix."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        sym = 0.5 * (M + np.swapaxes(M, -1, -2))
        return np.linalg.cholesky(sym)


def _sample_iw(nu, Psi, size, rng):
    """``size`` draws from the conventional ``IW_m(nu, Psi)``.

    Bartlett: with ``Psi^{-1} = L L^T`` and lower-triangular ``A`` (chi
    diagonal, normal below), ``W = L A A^T L^T ~ Wishart(nu, Psi^{-1})`` and
    ``Sigma = W^{-1} = M^{-T} M^{-1}`` for ``M = L A``.
    """
    m = Psi.shape[0]
    Linv_psi = np.linalg.inv(_chol(Psi))  # Psi^{-1} = Linv_psi^T Linv_psi
    L = Linv_psi.T
    A = np.zeros((size, m, m))
    dfs = nu - np.arange(m)
    A[:, np.arange(m), np.arange(m)] = np.sqrt(rng.chisquare(dfs, size=(size, m)))
    low = np.tril_indices(m, -1)
    if low[0].size:
        A[:, low[0], low[1]] = rng.standard_normal((size, low[0].size))
    M = L @ A
    Minv = np.linalg.inv(M)
    sigma = np.swapaxes(Minv, -1, -2) @ Minv
    return 0.5 * (sigma + np.swapaxes(sigma, -1, -2))


def _index(a):
    return np.array(sorted(a), dtype=int)


def sample_hiw_batch(params: HIWParams, rng, size):
    """``size`` covariance draws from ``HIW_G(b, D)``, shape ``(size, q, q)``."""
    b, D = params.b, params.D
    tree = junction_tree(params.graph)
    q = D.shape[0]
    sigma = np.zeros((size, q, q))
    seen = np.zeros(0, dtype=int)
    for j, clique in enumerate(tree.cliques):
        sep = tree.separators[j - 1] if j else frozenset()
        C = _index(clique)
        nu = b + C.size - 1
        if not sep:
            sigma[:, C[:, None], C] = _sample_iw(nu, D[np.ix_(C, C)], size, rng)
            seen = np.union1d(seen, C)
            continue
        S = _index(sep)
        R = _index(clique - sep)
        D_SS = D[np.ix_(S, S)]
        D_SR = D[np.ix_(S, R)]
        cf = cho_factor(D_SS, lower=True)
        mean_A = cho_solve(cf, D_SR)
        D_RgS = D[np.ix_(R, R)] - D_SR.T @ mean_A
        s_rgs = _sample_iw(nu, D_RgS, size, rng)
        # A ~ MN(D_SS^{-1} D_SR, D_SS^{-1}, Sigma_{R.S})
        row_f = solve_triangular(cf[0], np.eye(S.size), lower=True, trans="T")
        col_f = _chol(s_rgs)
        Z = rng.standard_normal((size, S.size, R.size))
        A = mean_A + row_f @ Z @ np.swapaxes(col_f, -1, -2)
        s_ss = sigma[:, S[:, None], S]
        s_sr = s_ss @ A
        s_rr = s_rgs + np.swapaxes(A, -1, -2) @ s_sr
        sigma[:, S[:, None], R] = s_sr
        sigma[:, R[:, None], S] = np.swapaxes(s_sr, -1, -2)
        sigma[:, R[:, None], R] = 0.5 * (s_rr + np.swapaxes(s_rr, -1, -2))
        rest = np.setdiff1d(seen, S)
        if rest.size:
            cross = np.swapaxes(A, -1, -2) @ sigma[:, S[:, None], rest]
            sigma[:, R[:, None], rest] = cross
            sigma[:, rest[:, None], R] = np.swapaxes(cross, -1, -2)
        seen = np.union1d(seen, R)
    return sigma


def clique_combined_inverse(M, graph):
    """``sum_C (M_C)^{-1}|_0 - sum_S (M_S)^{-1}|_0`` over the junction tree.

    For a matrix that is Markov with respect to ``graph`` this equals its
    inverse, with exact zeros off the edges.
    """
    tree = junction_tree(graph)
    M = np.asarray(M, dtype=float)
    out = np.zeros_like(M)
    for sign, sets in ((1.0, tree.cliques), (-1.0, tree.separators)):
        for a in sets:
            if not a:
                continue
            idx = _index(a)
            block = M[..., idx[:, None], idx]
            inv = np.linalg.inv(block)
            out[..., idx[:, None], idx] += sign * inv
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sample_hiw(params: HIWParams, rng) -> CovarianceDraw:
    """A single ``HIW_G(b, D)`` draw with its graph-structured precision."""
    sigma = sample_hiw_batch(params, rng, 1)[0]
    return CovarianceDraw(sigma, clique_combined_inverse(sigma, params.graph))


def posterior_params(data: ModelData, gamma, graph, hyper) -> HIWParams:
    """``HIW_G(b + n, d I + S(gamma))``."""
    S = quad_form(data, gamma, hyper.g)
    D = hyper.d * np.eye(data.q) + S
    return HIWParams(hyper.b + data.n, D, graph)


def sample_posterior_sigma(data: ModelData, gamma, graph, hyper, rng) -> CovarianceDraw:
    return sample_hiw(posterior_params(data, gamma, graph, hyper), rng)


def sample_posterior_B(data: ModelData, gamma, sigma, hyper, rng):
    """Coefficient draw given ``Sigma``, rows ordered as ``design.columns(gamma)``.

    ``B ~ MN(s (U^T U)^{-1} U^T Y, s (U^T U)^{-1}, Sigma)`` with
    ``s = g / (g + 1)`` and ``U = U_gamma``.
    """
    mask = as_mask(gamma)
    sig = getattr(sigma, "sigma", sigma)
    q = data.q
    if not mask.any():
        return np.zeros((0, q))
    cols, L = data.factor(mask)
    shrink = hyper.g / (hyper.g + 1.0)
    ols = cho_solve((L, True), data.uty[cols])
    mean = shrink * ols
    Z = rng.standard_normal((cols.size, q))
    # L^{-T} is a square root of (U^T U)^{-1}
    row = solve_triangular(L, Z, lower=True, trans="T")
    return mean + np.sqrt(shrink) * row @ _chol(sig).T


def posterior_B_moments(data: ModelData, gamma, hyper):
    """Mean and row covariance of the coefficient conditional."""
    mask = as_mask(gamma)
    cols, L = data.factor(mask)
    shrink = hyper.g / (hyper.g + 1.0)
    inv = cho_solve((L, True), np.eye(cols.size))
    return shrink * inv @ data.uty[cols], shrink * inv


def mle_precision(Sbar, graph):
    """Graph-constrained Gaussian MLE of the precision from a covariance estimate.

    Combines clique and separator inverses; the result is zero on every
    non-edge and its inverse reproduces ``Sbar`` on every clique block.
    """
    Sbar = np.asarray(Sbar, dtype=float)
    tree = junction_tree(graph)
    for a in tree.cliques:
        idx = _index(a)
        try:
            np.linalg.cholesky(Sbar[np.ix_(idx, idx)])
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(f"clique block {sorted(a)} is not positive definite") from None
    return clique_combined_inverse(Sbar, graph)
