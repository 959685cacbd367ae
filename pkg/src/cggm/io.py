"""CSV and trace-directory formats.

File conventions: data matrices (``X.csv``, ``Y.csv``) have a header row;
dense matrices (adjacency, covariance, edge probabilities) have none; edge
lists have the header ``i,j`` and 1-based node labels with ``i < j``.
Floats are written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .sampler import ChainTrace

__all__ = [
    "read_table",
    "write_table",
    "read_matrix",
    "write_matrix",
    "read_edge_list",
    "write_edge_list",
    "read_meta",
    "write_meta",
    "write_trace",
    "read_trace",
    "chain_dirs",
]

FLOAT_FMT = "%.17g"


def read_table(path):
    """Numeric CSV with a header row -> (names, array)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path} has a header but no data rows")
    try:
        values = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if values.shape[1] != len(header):
        raise ValueError(f"{path}: rows have {values.shape[1]} fields, header has {len(header)}")
    return [h.strip() for h in header], values


def write_table(path, names, values, fmt=FLOAT_FMT):
    np.savetxt(path, np.asarray(values), delimiter=",", header=",".join(names), comments="", fmt=fmt)


def read_matrix(path):
    m = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    return m


def write_matrix(path, M, fmt=FLOAT_FMT):
    np.savetxt(path, np.asarray(M), delimiter=",", fmt=fmt)


def write_edge_list(path, edges, extra=None, extra_names=()):
    """Edges as 1-based ``i,j`` rows, optionally with extra columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", *extra_names])
        for r, (i, j) in enumerate(sorted(edges)):
            row = [i + 1, j + 1]
            if extra is not None:
                row += [FLOAT_FMT % v for v in extra[r]]
            w.writerow(row)


def read_edge_list(path, q):
    """Adjacency (q x q bool) from a 1-based ``i,j`` edge list."""
    a = np.zeros((q, q), dtype=bool)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    for r in rows[1:]:
        if not r:
            continue
        i, j = int(r[0]) - 1, int(r[1]) - 1
        if not (0 <= i < q and 0 <= j < q) or i == j:
            raise ValueError(f"{path}: bad edge {r[:2]} for {q} nodes")
        a[i, j] = a[j, i] = True
    return a


def read_graph_file(path, q):
    """Adjacency from either an ``i,j`` edge list or a dense 0/1 matrix."""
    with open(path) as fh:
        first = fh.readline().strip().replace(" ", "")
    if first.startswith("i,j"):
        return read_edge_list(path, q)
    a = read_matrix(path).astype(bool)
    if a.shape != (q, q):
        raise ValueError(f"{path}: expected a {q} x {q} adjacency matrix, got {a.shape}")
    return a


def write_meta(path, items):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={_fmt(v)}\n")


def _fmt(v):
    if isinstance(v, float):
        return FLOAT_FMT % v
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def read_meta(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def write_trace(directory, trace: ChainTrace, design=None, extra_meta=None):
    """Persist one chain: gamma.csv, edges.csv, logpost.csv, meta and optional draws."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    it = trace.iterations
    write_table(
        d / "gamma.csv",
        ["iteration"] + [f"x{i + 1}" for i in range(trace.p)],
        np.column_stack([it, trace.gamma.astype(int)]),
        fmt="%d",
    )
    iu, ju = np.triu_indices(trace.q, 1)
    with open(d / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "i", "j"])
        rec, col = np.nonzero(trace.edges)
        for r, c in zip(rec.tolist(), col.tolist()):
            w.writerow([int(it[r]), iu[c] + 1, ju[c] + 1])
    with open(d / "logpost.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "log_posterior", "gamma_accepted", "graph_accepted"])
        for r in range(len(trace)):
            w.writerow([int(it[r]), FLOAT_FMT % trace.log_posterior[r], int(trace.gamma_accepts[r]), int(trace.graph_accepted[r])])
    if trace.sigma_draws is not None:
        m = len(trace)
        write_matrix(d / "sigma.csv", np.column_stack([it, trace.sigma_draws.reshape(m, -1)]))
        write_matrix(d / "coef.csv", np.column_stack([it, trace.B_draws.reshape(m, -1)]))
    meta = {
        "p": trace.p,
        "q": trace.q,
        "records": len(trace),
        "seed": trace.seed if trace.seed is not None else "",
        "gamma_acceptance": trace.gamma_acceptance_rate,
        "graph_acceptance": trace.graph_acceptance_rate,
    }
    meta.update({f"count_{k}": v for k, v in trace.counts.items()})
    if design is not None:
        meta["k"] = design.k
        meta["knots"] = list(design.basis.knots)
    if extra_meta:
        meta.update(extra_meta)
    write_meta(d / "meta", meta)


def read_trace(directory) -> ChainTrace:
    d = Path(directory)
    meta = read_meta(d / "meta")
    p, q = int(meta["p"]), int(meta["q"])
    _, g = read_table(d / "gamma.csv") if int(meta["records"]) else (None, np.zeros((0, p + 1)))
    it = g[:, 0].astype(np.int64)
    gamma = g[:, 1:].astype(bool)
    row_of = {v: r for r, v in enumerate(it.tolist())}
    edges = np.zeros((it.size, q * (q - 1) // 2), dtype=bool)
    with open(d / "edges.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for rec in reader:
            if not rec:
                continue
            i, j = int(rec[1]) - 1, int(rec[2]) - 1
            edges[row_of[int(rec[0])], i * q - i * (i + 1) // 2 + (j - i - 1)] = True
    lp = np.zeros(it.size)
    ga = np.zeros(it.size, dtype=np.int32)
    Ga = np.zeros(it.size, dtype=bool)
    if it.size:
        _, L = read_table(d / "logpost.csv")
        lp, ga, Ga = L[:, 1], L[:, 2].astype(np.int32), L[:, 3].astype(bool)
    sig = B = None
    if (d / "sigma.csv").exists() and it.size:
        S = read_matrix(d / "sigma.csv")
        sig = S[:, 1:].reshape(it.size, q, q)
        C = read_matrix(d / "coef.csv")
        B = C[:, 1:].reshape(it.size, -1, q)
    counts = {k[6:]: int(v) for k, v in meta.items() if k.startswith("count_")}
    seed = int(meta["seed"]) if meta.get("seed") else None
    return ChainTrace(
        p=p, q=q, iterations=it, gamma=gamma, edges=edges, log_posterior=lp,
        gamma_accepts=ga, graph_accepted=Ga, counts=counts, sigma_draws=sig, B_draws=B, seed=seed,
    )


def chain_dirs(directory):
    """Chain subdirectories of a fit output, or the directory itself if it is a chain."""
    d = Path(directory)
    if (d / "meta").exists() and (d / "gamma.csv").exists():
        return [d]
    subs = sorted((s for s in d.glob("chain_*") if (s / "gamma.csv").exists()), key=lambda s: int(s.name.split("_")[1]))
    return subs


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
