"""Collapsed Metropolis-Hastings search over (gamma, G).

Each iteration performs ``p`` single-entry gamma proposals (random scan)
followed by one add/delete edge proposal. Both coefficient matrix and
covariance are integrated out; draws of them are only taken at saved
iterations when ``Schedule.save_sigma`` is set, from a separate random
stream so the (gamma, G) trace does not depend on that flag.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChainError, RankDeficientError
from .graph import DecomposableGraph, log_prior_graph, toggle_move
from .hiw import clique_combined_inverse, posterior_params, sample_hiw_batch, sample_posterior_B
from .likelihood import (
    Hyperparameters,
    ModelData,
    log_marginal,
    log_marginal_ratio_gamma,
    log_marginal_ratio_graph,
)

__all__ = [
    "InclusionVector",
    "ChainState",
    "ChainTrace",
    "Schedule",
    "log_prior_gamma",
    "initial_state",
    "step_gamma",
    "step_graph",
    "run_chain",
    "ChainError",
]

log = logging.getLogger(__name__)

_CHUNK = 1024


class InclusionVector:
    """Immutable predictor-inclusion bits ``gamma`` with cached count."""

    __slots__ = ("mask", "count", "_key")

    def __init__(self, bits):
        mask = np.array(bits, dtype=bool).ravel()
        mask.setflags(write=False)
        self.mask = mask
        self.count = int(mask.sum())
        self._key = mask.tobytes()

    @classmethod
    def zeros(cls, p):
        return cls(np.zeros(p, dtype=bool))

    @property
    def bits(self):
        return tuple(self.mask.tolist())

    @property
    def p(self):
        return self.mask.size

    def flipped(self, i):
        m = self.mask.copy()
        m[i] = not m[i]
        return InclusionVector(m)

    def __eq__(self, other):
        if not isinstance(other, InclusionVector):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"InclusionVector({np.flatnonzero(self.mask).tolist()} of {self.p})"


def log_prior_gamma(gamma):
    """``log(p_gamma! (p - p_gamma)!)``: Bernoulli prior with a uniform weight integrated out."""
    if not isinstance(gamma, InclusionVector):
        gamma = InclusionVector(gamma)
    return math.lgamma(gamma.count + 1) + math.lgamma(gamma.p - gamma.count + 1)


@dataclass(frozen=True)
class ChainState:
    gamma: InclusionVector
    graph: DecomposableGraph
    log_marginal: float
    log_prior_gamma: float
    log_prior_graph: float

    @property
    def tree(self):
        return self.graph._tree

    @property
    def log_posterior(self):
        """Unnormalised log posterior of (gamma, G)."""
        return self.log_marginal + self.log_prior_gamma + self.log_prior_graph


def initial_state(data: ModelData, hyper: Hyperparameters, gamma=None, graph=None):
    """Chain state with fresh cached values; defaults to empty gamma and graph."""
    gamma = InclusionVector.zeros(data.p) if gamma is None else gamma
    if not isinstance(gamma, InclusionVector):
        gamma = InclusionVector(gamma)
    graph = DecomposableGraph.empty(data.q) if graph is None else graph
    return ChainState(
        gamma,
        graph,
        log_marginal(data, gamma, graph, hyper),
        log_prior_gamma(gamma),
        log_prior_graph(graph, hyper.alpha_g),
    )


@dataclass
class _Counts:
    gamma_proposals: int = 0
    gamma_accepted: int = 0
    graph_proposals: int = 0
    graph_accepted: int = 0
    rank_rejections: int = 0
    nondecomposable: int = 0


def _accept(log_ratio, u):
    return log_ratio >= 0.0 or u < math.exp(log_ratio)


def _gamma_move(state, data, hyper, i, u, u_acc, counts):
    counts.gamma_proposals += 1
    gamma = state.gamma
    present = gamma.mask[i]
    if present:
        if u >= 1.0 - hyper.delta:
            counts.gamma_accepted += 1
            return state, True
        log_h = math.log(hyper.delta / (1.0 - hyper.delta))
    else:
        if u >= hyper.delta:
            counts.gamma_accepted += 1
            return state, True
        log_h = math.log((1.0 - hyper.delta) / hyper.delta)
    new = gamma.flipped(i)
    try:
        ratio = log_marginal_ratio_gamma(data, gamma, new, state.graph, hyper)
    except RankDeficientError:
        counts.rank_rejections += 1
        if counts.rank_rejections == 1 or counts.rank_rejections % 1000 == 0:
            log.warning("rejected rank-deficient gamma proposal %s (%d so far)", new, counts.rank_rejections)
        return state, False
    lp_new = log_prior_gamma(new)
    if not _accept(ratio + lp_new - state.log_prior_gamma + log_h, u_acc):
        return state, False
    counts.gamma_accepted += 1
    lm = log_marginal(data, new, state.graph, hyper)
    return ChainState(new, state.graph, lm, lp_new, state.log_prior_graph), True


def _graph_move(state, data, hyper, index, u, u_acc, counts):
    counts.graph_proposals += 1
    new_graph, log_h, shape = toggle_move(state.graph, index, u, hyper.eta)
    if shape == "stay":
        counts.graph_accepted += 1
        return state, True
    if shape == "rejected_nondecomposable":
        counts.nondecomposable += 1
        return state, False
    ratio = log_marginal_ratio_graph(data, state.gamma, state.graph, new_graph, hyper)
    lp_new = log_prior_graph(new_graph, hyper.alpha_g)
    if not _accept(ratio + lp_new - state.log_prior_graph + log_h, u_acc):
        return state, False
    counts.graph_accepted += 1
    lm = log_marginal(data, state.gamma, new_graph, hyper)
    return ChainState(state.gamma, new_graph, lm, state.log_prior_gamma, lp_new), True


def step_gamma(state, data, hyper, rng, counts=None):
    """One single-entry gamma proposal and MH accept/reject.

    Returns ``(new_state, accepted)``. Identity proposals count as accepted.
    A rank-deficient proposal is rejected and logged.
    """
    p = state.gamma.p
    i = int(rng.integers(p))
    u, u_acc = rng.random(2)
    return _gamma_move(state, data, hyper, i, float(u), float(u_acc), counts or _Counts())


def step_graph(state, data, hyper, rng, counts=None):
    """One add/delete edge proposal and MH accept/reject.

    Non-decomposable proposals leave the state unchanged and report
    ``accepted=False``; "stay" proposals are accepted no-ops.
    """
    n_pairs = state.graph.n_pairs
    index = int(rng.integers(n_pairs)) if n_pairs else 0
    u, u_acc = rng.random(2)
    return _graph_move(state, data, hyper, index, float(u), float(u_acc), counts or _Counts())


@dataclass(frozen=True)
class Schedule:
    """Chain length and bookkeeping.

    ``update_gamma=False`` freezes gamma at its initial value (graph-only
    fit); ``update_graph=False`` freezes the graph.
    """

    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int | None = None
    save_sigma: bool = False
    record_burn_in: bool = False
    audit_every: int = 0
    update_gamma: bool = True
    update_graph: bool = True
    log_every: int = 0

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0:
            raise ValueError("iterations and burn_in must be non-negative")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    def is_recorded(self, it):
        """Whether 1-based iteration ``it`` is stored in the trace."""
        start = 0 if self.record_burn_in else self.burn_in
        return it > start and (it - start) % self.thin == 0

    def n_records(self):
        start = 0 if self.record_burn_in else self.burn_in
        return max(self.iterations - start, 0) // self.thin


@dataclass
class ChainTrace:
    """Recorded (gamma, G) states and acceptance bookkeeping of one chain.

    ``edges`` holds the ``q(q-1)/2`` upper-triangle indicators of every
    recorded graph in row-major pair order.
    """

    p: int
    q: int
    iterations: np.ndarray
    gamma: np.ndarray
    edges: np.ndarray
    log_posterior: np.ndarray
    gamma_accepts: np.ndarray
    graph_accepted: np.ndarray
    initial_state: ChainState | None = None
    final_state: ChainState | None = None
    counts: dict = field(default_factory=dict)
    sigma_draws: np.ndarray | None = None
    B_draws: np.ndarray | None = None
    seed: int | None = None

    def __len__(self):
        return self.iterations.size

    def adjacency(self, r):
        a = np.zeros((self.q, self.q), dtype=bool)
        a[np.triu_indices(self.q, 1)] = self.edges[r]
        return a | a.T

    def edge_list(self, r):
        iu, ju = np.triu_indices(self.q, 1)
        sel = self.edges[r]
        return list(zip(iu[sel].tolist(), ju[sel].tolist()))

    def graph(self, r):
        return DecomposableGraph(self.q, self.edge_list(r))

    @property
    def gamma_acceptance_rate(self):
        c = self.counts
        return c["gamma_accepted"] / c["gamma_proposals"] if c.get("gamma_proposals") else float("nan")

    @property
    def graph_acceptance_rate(self):
        c = self.counts
        return c["graph_accepted"] / c["graph_proposals"] if c.get("graph_proposals") else float("nan")


def _audit(state, data, hyper, it):
    fresh = log_marginal(data, state.gamma, state.graph, hyper, use_cache=False)
    if abs(fresh - state.log_marginal) > 1e-9:
        raise RuntimeError(
            f"cached log marginal {state.log_marginal!r} differs from fresh {fresh!r} at iteration {it}"
        )
    if abs(log_prior_gamma(state.gamma) - state.log_prior_gamma) > 1e-12:
        raise RuntimeError(f"cached gamma prior is stale at iteration {it}")
    if abs(log_prior_graph(state.graph, hyper.alpha_g) - state.log_prior_graph) > 1e-12:
        raise RuntimeError(f"cached graph prior is stale at iteration {it}")


def run_chain(data: ModelData, hyper: Hyperparameters, schedule: Schedule, rng=None, state=None) -> ChainTrace:
    """Run one chain and return its trace.

    With ``rng=None`` the generator is seeded from ``schedule.seed``; equal
    seeds give identical traces. ``state`` overrides the default start
    (empty gamma, empty graph). A numerical failure inside the loop raises
    ``ChainError`` carrying the records written so far.
    """
    if rng is None:
        rng = np.random.default_rng(schedule.seed)
    draw_rng = rng.spawn(1)[0]
    p, q = data.p, data.q
    n_pairs = q * (q - 1) // 2
    if state is None:
        state = initial_state(data, hyper)
    m = schedule.n_records()
    buf = {
        "iterations": np.zeros(m, dtype=np.int64),
        "gamma": np.zeros((m, p), dtype=bool),
        "edges": np.zeros((m, n_pairs), dtype=bool),
        "log_posterior": np.zeros(m),
        "gamma_accepts": np.zeros(m, dtype=np.int32),
        "graph_accepted": np.zeros(m, dtype=bool),
        "sigma_draws": np.zeros((m, q, q)) if schedule.save_sigma else None,
        "B_draws": np.zeros((m, p * (data.k + 1), q)) if schedule.save_sigma else None,
    }
    run = _Run(state)
    try:
        _loop(run, schedule, data, hyper, rng, draw_rng, buf)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError, RuntimeError) as exc:
        trace = _make_trace(p, q, buf, run, state, schedule)
        raise ChainError(f"chain failed at iteration {run.it}: {exc}", trace, run.it) from exc
    return _make_trace(p, q, buf, run, state, schedule)


@dataclass
class _Run:
    state: ChainState
    counts: _Counts = field(default_factory=_Counts)
    it: int = 0
    r: int = 0


def _make_trace(p, q, buf, run, start, schedule):
    r = run.r
    cut = {k: None if v is None else v[:r] for k, v in buf.items()}
    return ChainTrace(
        p=p,
        q=q,
        initial_state=start,
        final_state=run.state,
        counts=vars(run.counts).copy(),
        seed=schedule.seed,
        **cut,
    )


def _loop(run, schedule, data, hyper, rng, draw_rng, buf):
    p, q = data.p, data.q
    n_pairs = q * (q - 1) // 2
    counts = run.counts
    state = run.state
    pair_rows = {}
    do_gamma = schedule.update_gamma and p > 0
    do_graph = schedule.update_graph and n_pairs > 0
    while run.it < schedule.iterations:
        chunk = min(_CHUNK, schedule.iterations - run.it)
        if do_gamma:
            gi = rng.integers(p, size=(chunk, p)).tolist()
            gu = rng.random((chunk, p, 2)).tolist()
        if do_graph:
            ei = rng.integers(n_pairs, size=chunk).tolist()
            eu = rng.random((chunk, 2)).tolist()
        for c in range(chunk):
            run.it += 1
            it = run.it
            n_acc = 0
            if do_gamma:
                row_i, row_u = gi[c], gu[c]
                for s in range(p):
                    state, ok = _gamma_move(state, data, hyper, row_i[s], row_u[s][0], row_u[s][1], counts)
                    n_acc += ok
            acc_G = False
            if do_graph:
                state, acc_G = _graph_move(state, data, hyper, ei[c], eu[c][0], eu[c][1], counts)
            run.state = state
            if schedule.audit_every and it % schedule.audit_every == 0:
                _audit(state, data, hyper, it)
            if schedule.log_every and it % schedule.log_every == 0:
                log.info(
                    "iteration %d: p_gamma=%d |E|=%d log posterior %.4f",
                    it, state.gamma.count, state.graph.edge_count, state.log_posterior,
                )
            if not schedule.is_recorded(it):
                continue
            r = run.r
            buf["iterations"][r] = it
            buf["gamma"][r] = state.gamma.mask
            key = state.graph.edges
            row = pair_rows.get(key)
            if row is None:
                row = np.zeros(n_pairs, dtype=bool)
                for i, j in key:
                    row[i * q - i * (i + 1) // 2 + (j - i - 1)] = True
                if len(pair_rows) > 4096:
                    pair_rows.clear()
                pair_rows[key] = row
            buf["edges"][r] = row
            buf["log_posterior"][r] = state.log_posterior
            buf["gamma_accepts"][r] = n_acc
            buf["graph_accepted"][r] = acc_G
            if schedule.save_sigma:
                _save_draw(data, hyper, state, draw_rng, buf["sigma_draws"], buf["B_draws"], r)
            run.r = r + 1


def _save_draw(data, hyper, state, rng, sig, Bs, r):
    params = posterior_params(data, state.gamma, state.graph, hyper)
    sigma = sample_hiw_batch(params, rng, 1)[0]
    sig[r] = sigma
    if state.gamma.count:
        cols = data.design.columns(state.gamma.mask)
        Bs[r, cols] = sample_posterior_B(data, state.gamma, sigma, hyper, rng)


def with_seed(schedule, seed):
    return replace(schedule, seed=seed)


def precision_draws(trace: ChainTrace):
    """Graph-structured precision matrices for every saved covariance draw."""
    if trace.sigma_draws is None:
        raise ValueError("trace has no covariance draws; run with save_sigma=True")
    return np.stack([clique_combined_inverse(trace.sigma_draws[r], trace.graph(r)) for r in range(len(trace))])
