"""Posterior summaries computed from one or more chain traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DecomposableGraph, is_decomposable
from .hiw import clique_combined_inverse
from .spline import basis_functions

__all__ = [
    "PosteriorSummary",
    "edge_probabilities",
    "inclusion_probabilities",
    "select_graph",
    "partial_correlations",
    "hub_nodes",
    "fitted_curves",
    "roc_curve",
    "summarize",
]


def _as_traces(trace):
    traces = list(trace) if isinstance(trace, (list, tuple)) else [trace]
    if not traces or sum(len(t) for t in traces) == 0:
        raise ValueError("trace is empty")
    return traces


def edge_probabilities(trace):
    """Fraction of recorded states containing each edge (q x q, zero diagonal).

    A list of traces is pooled with every recorded state weighted equally.
    """
    traces = _as_traces(trace)
    q = traces[0].q
    edges = np.concatenate([t.edges for t in traces])
    out = np.zeros((q, q))
    out[np.triu_indices(q, 1)] = edges.mean(axis=0)
    return out + out.T


def inclusion_probabilities(trace):
    """Fraction of recorded states selecting each predictor."""
    traces = _as_traces(trace)
    return np.concatenate([t.gamma for t in traces]).mean(axis=0)


def select_graph(edge_prob, cutoff=0.5):
    """Boolean adjacency of the edges with probability above ``cutoff``.

    The result is not guaranteed to be decomposable.
    """
    if not 0.0 < cutoff < 1.0:
        raise ValueError("cutoff must lie in (0, 1)")
    a = np.asarray(edge_prob) > cutoff
    np.fill_diagonal(a, False)
    return a


def partial_correlations(draws, graphs=None):
    """Posterior mean of ``-K_ij / sqrt(K_ii K_jj)`` over precision draws.

    ``draws`` is a sequence of ``CovarianceDraw`` or a stack of covariance
    matrices; in the latter case ``graphs`` (one per draw) selects the
    graph-structured inverse, otherwise a dense inverse is used. The
    diagonal of the result is set to zero.
    """
    if draws is None or len(draws) == 0:
        raise ValueError("need at least one covariance draw")
    if hasattr(draws[0], "precision"):
        K = np.stack([d.precision for d in draws])
    elif graphs is not None:
        K = np.stack([clique_combined_inverse(s, g) for s, g in zip(draws, graphs)])
    else:
        K = np.linalg.inv(np.asarray(draws, dtype=float))
    dk = np.sqrt(np.einsum("...ii->...i", K))
    rho = -K / (dk[..., :, None] * dk[..., None, :])
    out = rho.mean(axis=0)
    np.fill_diagonal(out, 0.0)
    return out


def hub_nodes(graph):
    """``[(node, degree)]`` by descending degree, ties by node index."""
    if isinstance(graph, DecomposableGraph):
        deg = graph.degrees()
    else:
        a = np.asarray(graph, dtype=bool).copy()
        np.fill_diagonal(a, False)
        deg = a.sum(axis=1)
    order = sorted(range(len(deg)), key=lambda v: (-deg[v], v))
    return [(v, int(deg[v])) for v in order]


def fitted_curves(design, B_draws, predictor, grid):
    """Posterior mean of one predictor's fitted function for every response.

    ``B_draws`` has shape ``(m, p(k+1), q)`` with zero rows for predictors
    a draw did not select, so the mean is model-averaged. Returns a
    ``(len(grid), q)`` array, or ``None`` when the predictor was never
    selected in any draw.
    """
    B_draws = np.asarray(B_draws, dtype=float)
    if B_draws.ndim != 3 or B_draws.shape[0] == 0:
        raise ValueError("B_draws must be a non-empty (m, p(k+1), q) stack")
    rows = design.column_groups[predictor]
    coef = B_draws[:, rows, :]
    if not np.any(coef):
        return None
    basis = basis_functions(grid, design.basis.knots)
    return basis @ coef.mean(axis=0)


def roc_curve(edge_prob, truth):
    """ROC points over the off-diagonal pairs and the trapezoidal AUC.

    Thresholds are the distinct scores; a pair is called an edge when its
    score is at least the threshold. Returns ``(fpr, tpr, auc)`` with the
    curve running from (0, 0) to (1, 1).
    """
    truth = np.asarray(truth)
    edge_prob = np.asarray(edge_prob, dtype=float)
    if truth.shape != edge_prob.shape or truth.ndim != 2 or truth.shape[0] != truth.shape[1]:
        raise ValueError("edge_prob and truth must be square matrices of equal shape")
    if not np.array_equal(truth.astype(bool), truth.astype(bool).T):
        raise ValueError("truth adjacency is not symmetric")
    iu = np.triu_indices(truth.shape[0], 1)
    score = edge_prob[iu]
    label = truth.astype(bool)[iu]
    n_pos = label.sum()
    n_neg = label.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("truth needs at least one edge and one non-edge")
    thresholds = np.unique(score)[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for t in thresholds:
        called = score >= t
        tpr.append((called & label).sum() / n_pos)
        fpr.append((called & ~label).sum() / n_neg)
    fpr, tpr = np.array(fpr), np.array(tpr)
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return fpr, tpr, auc


@dataclass
class PosteriorSummary:
    edge_prob: np.ndarray
    incl_prob: np.ndarray
    selected_graph: np.ndarray
    selected_is_decomposable: bool
    partial_corr: np.ndarray | None
    hub_degrees: np.ndarray
    cutoff: float
    n_records: int


def summarize(trace, cutoff=0.5):
    """Edge and inclusion probabilities, thresholded graph, hubs, partial correlations."""
    traces = _as_traces(trace)
    ep = edge_probabilities(traces)
    ip = inclusion_probabilities(traces)
    sel = select_graph(ep, cutoff)
    pc = None
    if all(t.sigma_draws is not None for t in traces):
        sig = np.concatenate([t.sigma_draws for t in traces])
        graphs = [t.graph(r) for t in traces for r in range(len(t))]
        pc = partial_correlations(sig, graphs)
    return PosteriorSummary(
        edge_prob=ep,
        incl_prob=ip,
        selected_graph=sel,
        selected_is_decomposable=is_decomposable(sel),
        partial_corr=pc,
        hub_degrees=sel.sum(axis=1),
        cutoff=cutoff,
        n_records=sum(len(t) for t in traces),
    )
