"""Random merge trees for tests."""

import numpy as np

from mtsketch.mtree import MergeTree


def random_merge_tree(rng, n_leaves, gap=(1.0, 2.0), root_edge=True):
    """Binary merge tree built by merging random components upward.

    Every edge weight is drawn from ``gap``, so no feature falls below the
    simplification thresholds of a blowup of moderate size.
    """
    ids = list(range(n_leaves))
    f = list(-rng.uniform(0.0, 1.0, n_leaves) * gap[0])
    tops = list(range(n_leaves))
    edges = []
    nxt = n_leaves
    while len(tops) > 1:
        i, j = sorted(rng.choice(len(tops), 2, replace=False).tolist())
        a, b = tops[i], tops[j]
        level = max(f[a], f[b]) + rng.uniform(*gap)
        ids.append(nxt)
        f.append(level)
        edges += [(a, nxt), (b, nxt)]
        tops = [t for k, t in enumerate(tops) if k not in (i, j)] + [nxt]
        nxt += 1
    root = tops[0]
    if root_edge:
        ids.append(nxt)
        f.append(f[root] + rng.uniform(*gap))
        edges.append((root, nxt))
        root = nxt
    return MergeTree(ids, np.array(f), edges, root)


def random_weighted_tree(rng, n, low=0.5, high=2.0):
    """Uniform-attachment tree on ``n`` nodes with weights in ``[low, high)``."""
    from mtsketch.mtree import WeightedTree

    edges = [(int(rng.integers(0, i)), i, float(rng.uniform(low, high))) for i in range(1, n)]
    return WeightedTree(list(range(n)), edges, root=0)


def random_tree_network(rng, n):
    from mtsketch.network import to_network

    return to_network(random_weighted_tree(rng, n))


def random_coupling(rng, p1, p2):
    """A random feasible coupling: a mix of the product plan and a random transport vertex."""
    from mtsketch.kernels import transport_simplex

    vertex, _ = transport_simplex(p1, p2, rng.random((len(p1), len(p2))))
    t = rng.uniform()
    return t * np.outer(p1, p2) + (1 - t) * vertex
