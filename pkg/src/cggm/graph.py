"""Decomposable graphs, junction trees and the add/delete edge proposal.

Nodes are labelled ``0 .. q-1``. An edge is stored as an ordered pair
``(i, j)`` with ``i < j``. Chordality is tested with maximum cardinality
search (MCS) followed by a perfect-elimination check; cliques are read off
the same MCS ordering, which yields them in an order that already has the
running intersection property.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations

import numpy as np

from .errors import NotDecomposableError

__all__ = [
    "DecomposableGraph",
    "JunctionTree",
    "ComponentDiff",
    "is_decomposable",
    "junction_tree",
    "propose_edge_toggle",
    "log_prior_graph",
    "affected_components",
    "pair_index",
    "index_pair",
    "default_alpha_g",
]


def _normalize_edges(edges, q):
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise ValueError(f"self loop ({i}, {j}) is not an edge")
        if not (0 <= i < q and 0 <= j < q):
            raise ValueError(f"edge ({i}, {j}) out of range for {q} nodes")
        out.add((i, j) if i < j else (j, i))
    return frozenset(out)


def _neighbours(q, edges):
    nbrs = [set() for _ in range(q)]
    for i, j in edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    return nbrs


def _mcs(q, nbrs):
    """Maximum cardinality search, ties to the lowest node index.

    Returns the visiting order, and for every visited node the set of its
    neighbours visited before it together with the latest of those
    (``None`` when there are none).
    """
    weight = [0] * q
    numbered = [False] * q
    pos = [0] * q
    order = []
    for step in range(q):
        best, best_w = -1, -1
        for v in range(q):
            if not numbered[v] and weight[v] > best_w:
                best, best_w = v, weight[v]
        numbered[best] = True
        pos[best] = step
        order.append(best)
        for u in nbrs[best]:
            if not numbered[u]:
                weight[u] += 1
    earlier = {}
    parent = {}
    for v in order:
        e = {u for u in nbrs[v] if pos[u] < pos[v]}
        earlier[v] = e
        parent[v] = max(e, key=pos.__getitem__) if e else None
    return order, earlier, parent


def _is_peo(nbrs, order, earlier, parent):
    for v in order:
        p = parent[v]
        if p is not None and not (earlier[v] - {p}) <= nbrs[p]:
            return False
    return True


@lru_cache(maxsize=8192)
def _analyse(q, edges):
    """``JunctionTree`` of an edge set, or ``None`` if it is not chordal."""
    nbrs = _neighbours(q, edges)
    order, earlier, parent = _mcs(q, nbrs)
    if not _is_peo(nbrs, order, earlier, parent):
        return None
    # C_v = {v} + earlier(v) is maximal unless some w has earlier(w) == C_v,
    # and in a perfect ordering that w must have v as its parent.
    absorbed = set()
    for w in order:
        p = parent[w]
        if p is not None and len(earlier[w]) == len(earlier[p]) + 1:
            absorbed.add(p)
    cliques = tuple(frozenset(earlier[v] | {v}) for v in order if v not in absorbed)
    seps = []
    seen = set(cliques[0]) if cliques else set()
    for c in cliques[1:]:
        seps.append(frozenset(c & seen))
        seen |= c
    return JunctionTree(cliques, tuple(seps))


def _check_adjacency(adjacency):
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("adjacency must have at least one node")
    a = a.astype(bool)
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency is not symmetric")
    return a


def _edges_from_adjacency(a):
    i, j = np.nonzero(np.triu(a, 1))
    return frozenset(zip(i.tolist(), j.tolist()))


def is_decomposable(adjacency) -> bool:
    """True iff the undirected graph with this adjacency matrix is chordal.

    The diagonal is ignored. Raises ``ValueError`` for non-symmetric input.
    """
    a = _check_adjacency(adjacency)
    return _analyse(a.shape[0], _edges_from_adjacency(a)) is not None


@dataclass(frozen=True)
class JunctionTree:
    """Cliques ``C_1..C_k`` in a perfect order and separators ``S_2..S_k``.

    ``separators[j - 1]`` is ``C_j`` intersected with the union of the
    earlier cliques; it is empty when ``C_j`` starts a new connected
    component.
    """

    cliques: tuple
    separators: tuple

    @cached_property
    def _components(self):
        return Counter(self.cliques), Counter(s for s in self.separators if s)

    def components(self):
        """Multisets (clique counter, non-empty separator counter)."""
        c, s = self._components
        return Counter(c), Counter(s)


class DecomposableGraph:
    """Immutable chordal graph on ``node_count`` labelled nodes.

    Construction checks chordality and raises ``NotDecomposableError`` if
    the edge set has a chordless cycle of length four or more.
    """

    __slots__ = ("node_count", "edges", "_tree")

    def __init__(self, node_count, edges=()):
        q = int(node_count)
        if q < 1:
            raise ValueError("node_count must be positive")
        edges = _normalize_edges(edges, q)
        tree = _analyse(q, edges)
        if tree is None:
            raise NotDecomposableError("edge set is not decomposable (chordal)")
        self._init(q, edges, tree)

    def _init(self, q, edges, tree):
        object.__setattr__(self, "node_count", q)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_tree", tree)

    @classmethod
    def _trusted(cls, q, edges, tree):
        g = cls.__new__(cls)
        g._init(q, edges, tree)
        return g

    def __setattr__(self, name, value):
        raise AttributeError("DecomposableGraph is immutable")

    def __reduce__(self):
        return (DecomposableGraph, (self.node_count, sorted(self.edges)))

    @classmethod
    def empty(cls, q):
        return cls(q)

    @classmethod
    def complete(cls, q):
        return cls(q, combinations(range(q), 2))

    @classmethod
    def from_adjacency(cls, adjacency):
        a = _check_adjacency(adjacency)
        return cls(a.shape[0], _edges_from_adjacency(a))

    @property
    def adjacency(self):
        """Symmetric boolean matrix; the diagonal is left False."""
        a = np.zeros((self.node_count, self.node_count), dtype=bool)
        if self.edges:
            i, j = np.array(sorted(self.edges)).T
            a[i, j] = True
            a[j, i] = True
        return a

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def n_pairs(self):
        return self.node_count * (self.node_count - 1) // 2

    def has_edge(self, i, j):
        return ((i, j) if i < j else (j, i)) in self.edges

    def degrees(self):
        deg = np.zeros(self.node_count, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def toggled(self, i, j):
        """The graph with edge ``(i, j)`` flipped, or ``None`` if not chordal."""
        e = (i, j) if i < j else (j, i)
        edges = self.edges - {e} if e in self.edges else self.edges | {e}
        tree = _analyse(self.node_count, edges)
        if tree is None:
            return None
        return DecomposableGraph._trusted(self.node_count, edges, tree)

    def __eq__(self, other):
        if not isinstance(other, DecomposableGraph):
            return NotImplemented
        return self.node_count == other.node_count and self.edges == other.edges

    def __hash__(self):
        return hash((self.node_count, self.edges))

    def __repr__(self):
        return f"DecomposableGraph({self.node_count}, {sorted(self.edges)})"


def junction_tree(graph) -> JunctionTree:
    """Junction tree of a decomposable graph.

    Accepts a ``DecomposableGraph`` or an adjacency matrix; a non-chordal
    adjacency raises ``NotDecomposableError``. Isolated nodes become
    singleton cliques.
    """
    if isinstance(graph, DecomposableGraph):
        return graph._tree
    a = _check_adjacency(graph)
    tree = _analyse(a.shape[0], _edges_from_adjacency(a))
    if tree is None:
        raise NotDecomposableError("graph is not decomposable")
    return tree


def pair_index(i, j, q):
    """Row-major index of the pair ``i < j`` among the ``q(q-1)/2`` pairs."""
    if i > j:
        i, j = j, i
    return i * q - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=64)
def _pair_table(q):
    return tuple(combinations(range(q), 2))


def index_pair(index, q):
    return _pair_table(q)[index]


def toggle_move(graph, index, u, eta):
    """Deterministic core of the edge proposal given its two random inputs.

    ``index`` picks the off-diagonal pair and ``u`` in [0, 1) decides between
    flipping and staying.
    """
    if graph.node_count < 2:
        return graph, 0.0, "stay"
    i, j = _pair_table(graph.node_count)[index]
    present = (i, j) in graph.edges
    if present:
        if u >= 1.0 - eta:
            return graph, 0.0, "stay"
        shape, log_h = "delete", math.log(eta / (1.0 - eta))
    else:
        if u >= eta:
            return graph, 0.0, "stay"
        shape, log_h = "add", math.log((1.0 - eta) / eta)
    new = graph.toggled(i, j)
    if new is None:
        return graph, 0.0, "rejected_nondecomposable"
    return new, log_h, shape


def propose_edge_toggle(graph, eta, rng):
    """Add/delete proposal on a uniformly chosen off-diagonal pair.

    Returns ``(new_graph, log_hastings, shape)`` where ``shape`` is one of
    ``"add"``, ``"delete"``, ``"stay"`` or ``"rejected_nondecomposable"``;
    the latter two return the input graph unchanged with a zero log ratio.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    n_pairs = graph.n_pairs
    if n_pairs == 0:
        return graph, 0.0, "stay"
    index = int(rng.integers(n_pairs))
    return toggle_move(graph, index, float(rng.random()), eta)


def log_prior_graph(graph, alpha_g):
    """Independent Bernoulli(alpha_g) prior over the q(q-1)/2 edge indicators."""
    if not 0.0 < alpha_g < 1.0:
        raise ValueError("alpha_g must lie in (0, 1)")
    e = graph.edge_count
    return e * math.log(alpha_g) + (graph.n_pairs - e) * math.log1p(-alpha_g)


def default_alpha_g(q, cap=0.5):
    """``2 / (q - 1)`` clamped to ``cap`` so small graphs stay proper."""
    if q < 2:
        return cap
    return min(2.0 / (q - 1), cap)


@dataclass(frozen=True)
class ComponentDiff:
    """Clique and separator multisets present in only one of two trees."""

    old_cliques: Counter
    old_separators: Counter
    new_cliques: Counter
    new_separators: Counter


def affected_components(old, new, toggled_pair=None) -> ComponentDiff:
    """Symmetric difference of the clique/separator multisets of two trees.

    ``old`` and ``new`` must differ in exactly one edge; if
    ``toggled_pair`` is given it must be that edge.
    """
    if old.node_count != new.node_count:
        raise ValueError("graphs have different node counts")
    diff = old.edges ^ new.edges
    if len(diff) != 1:
        raise ValueError(f"graphs differ in {len(diff)} edges, expected exactly 1")
    if toggled_pair is not None:
        i, j = toggled_pair
        if ((i, j) if i < j else (j, i)) not in diff:
            raise ValueError(f"graphs do not differ in pair {toggled_pair}")
    return _diff(old, new)


@lru_cache(maxsize=8192)
def _diff(old, new):
    oc, os_ = old._tree._components
    nc, ns = new._tree._components
    return ComponentDiff(oc - nc, os_ - ns, nc - oc, ns - os_)
