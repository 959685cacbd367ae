"""Decomposable graphs: chordality, junction trees and single-edge moves."""

import numpy as np

from cggm.graph import DecomposableGraph, is_decomposable, junction_tree, propose_edge_toggle

# a 4-cycle has no chord, so it is not decomposable
cycle = np.zeros((4, 4), dtype=bool)
for i, j in [(0, 1), (1, 2), (2, 3), (3, 0)]:
    cycle[i, j] = cycle[j, i] = True
print("4-cycle decomposable:", is_decomposable(cycle))

# adding a chord fixes that
cycle[0, 2] = cycle[2, 0] = True
g = DecomposableGraph.from_adjacency(cycle)
tree = junction_tree(g)
print("cliques:", [sorted(c) for c in tree.cliques])
print("separators:", [sorted(s) for s in tree.separators])

# random add/delete proposals never leave the decomposable set
rng = np.random.default_rng(0)
for _ in range(5):
    g, log_h, shape = propose_edge_toggle(g, 0.5, rng)
    print(f"{shape:>26}  edges={sorted(g.edges)}")
