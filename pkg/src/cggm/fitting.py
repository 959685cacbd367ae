"""End-to-end fitting: preprocessing, independent chains, summary files."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import io
from .errors import ChainError
from .graph import default_alpha_g
from .likelihood import Hyperparameters, ModelData
from .posterior import fitted_curves, hub_nodes, roc_curve, summarize
from .sampler import run_chain
from .spline import build_basis, even_knots

__all__ = ["preprocess", "make_data", "default_hyperparameters", "chain_seeds", "run_chains", "write_summary"]

log = logging.getLogger(__name__)


def preprocess(X, Y, standardize="zscore", center_y=True):
    """Column-center (``"center"``) or z-score (``"zscore"``) X; optionally center Y."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if standardize not in ("none", "center", "zscore"):
        raise ValueError(f"unknown standardize mode {standardize!r}")
    if standardize != "none":
        X = X - X.mean(axis=0)
    if standardize == "zscore":
        sd = X.std(axis=0)
        if np.any(sd == 0):
            raise ValueError("a predictor column is constant")
        X = X / sd
    if center_y:
        Y = Y - Y.mean(axis=0)
    return X, Y


def make_data(X, Y, knots=None, n_knots=10, knot_range=None, ridge=False):
    """``ModelData`` with evenly spaced knots over ``knot_range`` (default: pooled range of X)."""
    X = np.asarray(X, dtype=float)
    if knots is None:
        lo, hi = knot_range if knot_range is not None else (float(X.min()), float(X.max()))
        knots = even_knots(n_knots, lo, hi)
    return ModelData(Y, build_basis(X, knots), ridge=ridge)


def default_hyperparameters(n, p, q, g_rule="n", **overrides):
    """Defaults: g = n (or max(n, p^2)), b = 3, d = 1, delta = eta = 1/2, alpha_G = min(2/(q-1), 1/2)."""
    g = float(n) if g_rule == "n" else float(max(n, p * p))
    alpha = overrides.pop("alpha_g", None)
    if alpha is None:
        alpha = default_alpha_g(q)
        if q > 1 and 2.0 / (q - 1) > 0.5:
            log.warning("alpha_G = 2/(q-1) = %.3g is degenerate for q=%d; using %.3g", 2.0 / (q - 1), q, alpha)
    kw = dict(g=g, alpha_g=alpha)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return Hyperparameters(**kw)


def chain_seeds(seed, chains):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(chains)]


def _one_chain(args):
    X, Y, knots, ridge, hyper, schedule, catch = args
    data = ModelData(Y, build_basis(X, knots), ridge=ridge)
    try:
        return run_chain(data, hyper, schedule)
    except ChainError as exc:
        if catch:
            return exc
        raise


def run_chains(X, Y, knots, hyper, schedule, chains=1, ridge=False, workers=None, return_errors=False):
    """Independent chains with seeds spawned from ``schedule.seed``; results in chain order.

    Parallelism is capped by ``workers`` or else the ``CGGM_THREADS``
    environment variable. With ``return_errors`` a failed chain appears in
    the result as its ``ChainError`` (which carries the partial trace)
    instead of aborting the others.
    """
    seeds = chain_seeds(schedule.seed, chains)
    jobs = [(X, Y, knots, ridge, hyper, replace(schedule, seed=s), return_errors) for s in seeds]
    if workers is None:
        workers = int(os.environ.get("CGGM_THREADS", os.cpu_count() or 1))
    workers = max(1, min(workers, chains))
    if workers == 1:
        return [_one_chain(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_chain, jobs))


def write_summary(out_dir, traces, design=None, cutoff=0.5, truth=None, grid_size=101):
    """Write the summary files for pooled traces; returns the ``PosteriorSummary``."""
    out = io.ensure_dir(out_dir)
    s = summarize(traces, cutoff)
    io.write_matrix(out / "edge_prob.csv", s.edge_prob)
    io.write_table(out / "incl_prob.csv", ["predictor", "probability"],
                   np.column_stack([np.arange(1, s.incl_prob.size + 1), s.incl_prob]))
    sel_edges = list(zip(*np.nonzero(np.triu(s.selected_graph, 1))))
    extra = [[s.edge_prob[i, j], s.partial_corr[i, j] if s.partial_corr is not None else np.nan] for i, j in sorted(sel_edges)]
    io.write_edge_list(out / "selected_edges.csv", sel_edges, extra, ("edge_prob", "partial_corr"))
    if s.partial_corr is not None:
        io.write_matrix(out / "partial_corr.csv", s.partial_corr)
    with open(out / "hubs.csv", "w") as fh:
        fh.write("node,degree\n")
        for v, deg in hub_nodes(s.selected_graph):
            fh.write(f"{v + 1},{deg}\n")
    if len(traces) > 1:
        per = [summarize(t, cutoff).edge_prob for t in traces]
        gap = max(float(np.abs(a - b).max()) for a in per for b in per)
        for c, ep in enumerate(per, 1):
            io.write_matrix(out / f"edge_prob_chain_{c}.csv", ep)
        io.write_meta(out / "convergence", {"max_abs_edge_prob_difference": gap, "chains": len(traces)})
    if design is not None and all(t.B_draws is not None for t in traces):
        B = np.concatenate([t.B_draws for t in traces])
        lo, hi = float(design.values[:, : design.p].min()), float(design.values[:, : design.p].max())
        grid = np.linspace(lo, hi, grid_size)
        for i in np.flatnonzero(s.incl_prob > cutoff):
            curves = fitted_curves(design, B, int(i), grid)
            if curves is None:
                continue
            io.write_table(out / f"curves_{i + 1}.csv", ["x"] + [f"y{j + 1}" for j in range(curves.shape[1])],
                           np.column_stack([grid, curves]))
    if truth is not None:
        fpr, tpr, auc = roc_curve(s.edge_prob, truth)
        write_roc(out / "roc.csv", fpr, tpr, auc)
    io.write_meta(out / "summary_meta", {
        "cutoff": cutoff,
        "records": s.n_records,
        "selected_is_decomposable": s.selected_is_decomposable,
        "selected_edges": len(sel_edges),
    })
    return s


def write_roc(path, fpr, tpr, auc):
    with open(path, "w") as fh:
        fh.write("fpr,tpr\n")
        for a, b in zip(fpr, tpr):
            fh.write(f"{io.FLOAT_FMT % a},{io.FLOAT_FMT % b}\n")
        fh.write(f"# auc={io.FLOAT_FMT % auc}\n")


def design_from_meta(meta, X=None):
    """Rebuild the design for curve evaluation from a chain's meta file."""
    knots = [float(v) for v in meta.get("knots", "").split()] if meta.get("knots") else []
    if X is None:
        lo = float(meta.get("x_min", -1.0))
        hi = float(meta.get("x_max", 1.0))
        p = int(meta["p"])
        X = np.tile(np.array([[lo], [hi]]), (1, p))
    return build_basis(X, knots)
