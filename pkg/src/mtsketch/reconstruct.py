"""Spanning trees of sketched weight matrices and reconstruction of merge trees."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError, ValidationError
from .mtree import MergeTree, WeightedTree, simplify
from .network import devectorize
from .sketcher import SketchResult


def _check_graph(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ShapeError(f"weight matrix must be square, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValidationError("weight matrix has non-finite entries")
    return W


def mst(W) -> WeightedTree:
    """Minimum spanning tree of the complete graph on ``W`` (lexicographic ties)."""
    W = _check_graph(W)
    us, vs = kernels.prim_mst(W)
    edges = [(int(u), int(v), float(W[u, v])) for u, v in zip(us.tolist(), vs.tolist())]
    return WeightedTree(list(range(W.shape[0])), edges)


# ---------------------------------------------------------------------------
# low-stretch spanning tree (petal decomposition)


def _shortest_paths(W, nodes, source):
    """Dijkstra inside ``nodes``; equal lengths prefer more hops.

    Preferring longer hop counts keeps metric closures of trees on their
    tree paths instead of the parallel direct edges.
    """
    dist = {source: 0.0}
    hops = {source: 0}
    pred = {source: None}
    heap = [(0.0, 0, source)]
    done = set()
    scale = 1e-12 * (1.0 + float(W[np.ix_(nodes, nodes)].max()))
    while heap:
        d, h, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        for y in nodes:
            if y in done:
                continue
            nd = d + W[x, y]
            nh = -h + 1
            if y not in dist or nd < dist[y] - scale or (abs(nd - dist[y]) <= scale and nh > hops[y]):
                dist[y] = nd
                hops[y] = nh
                pred[y] = x
                heapq.heappush(heap, (nd, -nh, y))
    return dist, pred


def _all_pairs(W, nodes):
    sub = W[np.ix_(nodes, nodes)].copy()
    for k in range(len(nodes)):
        np.minimum(sub, sub[:, [k]] + sub[[k], :], out=sub)
    return sub


def _petal_radius(entry, lo, hi):
    """Radius in ``[lo, hi]`` sitting in the widest gap between entry radii."""
    inside = np.sort(entry[(entry >= lo) & (entry <= hi)])
    points = np.concatenate([[lo], inside, [hi]])
    gaps = np.diff(points)
    k = int(np.argmax(gaps))
    return points[k] + 0.5 * gaps[k] if gaps[k] > 0 else points[k]


def _petal_decomposition(W, nodes, center):
    """Split ``nodes`` into petals around ``center`` plus the leftover stigma.

    Returns ``(clusters, links)``: clusters as ``(node list, cluster center)``
    with the stigma first, and the inter-cluster edges joining each petal to
    the part of the graph carved after it.
    """
    remaining = list(nodes)
    clusters = []
    links = []
    D_full = _all_pairs(W, remaining)
    c_idx = remaining.index(center)
    radius = float(D_full[c_idx].max())
    while True:
        D = _all_pairs(W, remaining)
        pos = {x: i for i, x in enumerate(remaining)}
        dc = D[pos[center]]
        far = [x for x in remaining if x != center and dc[pos[x]] >= radius / 2]
        if not far or radius <= 0:
            break
        target = max(far, key=lambda x: (dc[pos[x]], -x))
        _, pred = _shortest_paths(W, remaining, center)
        path = [target]
        while path[-1] != center:
            path.append(pred[path[-1]])
        path.reverse()  # center ... target
        dt = D[:, pos[target]]
        # smallest radius at which each node joins the petal
        entry = np.full(len(remaining), np.inf)
        for xk in path[1:]:
            ik = pos[xk]
            dk = dt[ik]
            cone = dc[ik] + D[ik] - dc
            entry = np.minimum(entry, dk + 2.0 * np.maximum(cone, 0.0))
        entry[pos[center]] = np.inf
        r = _petal_radius(entry, radius / 8, radius / 4)
        petal = [x for x in remaining if entry[pos[x]] <= r] or [target]
        if target not in petal:
            petal.append(target)
        inside = set(petal)
        step = next(i for i, x in enumerate(path) if x in inside)
        x_in, y_out = path[step], path[step - 1]
        clusters.append((sorted(petal), x_in))
        links.append((y_out, x_in))
        remaining = [x for x in remaining if x not in inside]
    clusters.insert(0, (remaining, center))
    return clusters, links


def _hierarchical(W, nodes, center, edges):
    if len(nodes) == 1:
        return
    # zero radius in the metric closure: every node coincides with the center
    if not np.any(_all_pairs(W, nodes)[nodes.index(center)]):
        for x in nodes:
            if x != center:
                edges.append((center, x))
        return
    clusters, links = _petal_decomposition(W, nodes, center)
    edges.extend(links)
    for members, c in clusters:
        _hierarchical(W, members, c, edges)


def lsst(W, root: int = 0) -> WeightedTree:
    """Low-stretch spanning tree by recursive petal decomposition from ``root``."""
    W = _check_graph(W)
    n = W.shape[0]
    if not 0 <= root < n:
        raise ValidationError(f"root {root} outside [0, {n})")
    edges: list[tuple[int, int]] = []
    _hierarchical(W, list(range(n)), root, edges)
    out = sorted((min(u, v), max(u, v)) for u, v in edges)
    return WeightedTree(list(range(n)), [(u, v, float(W[u, v])) for u, v in out], root)


def spanning_tree(W, method: str = "mst", root: int = 0) -> WeightedTree:
    if method == "mst":
        tree = mst(W)
        tree.root = root
        return tree
    if method == "lsst":
        return lsst(W, root)
    raise ValueError(f"unknown spanning tree method {method!r}")


def average_stretch(W, tree: WeightedTree) -> float:
    """Mean ratio of tree-path length to direct weight over pairs with positive weight."""
    D = tree.distances()
    iu = np.triu_indices(W.shape[0], 1)
    w = W[iu]
    mask = w > 0
    return float(np.mean(D[iu][mask] / w[mask])) if mask.any() else 1.0


# ---------------------------------------------------------------------------
# merge tree reconstruction


def clean_weights(W) -> np.ndarray:
    W = np.maximum(np.asarray(W, dtype=np.float64), 0.0)
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    return W


def reconstruct_sketched_tree(a_hat, n: int, method: str = "mst", c_alpha: float = 1.0,
                              c_beta: float = 1.0, root: int = 0) -> WeightedTree:
    """Devectorize, clean, span and simplify one sketched column.

    ``root`` is the reference row tracked as the tree's root; the result's
    ``root`` is the surviving node that absorbed it.
    """
    W = clean_weights(devectorize(a_hat, n))
    tree = spanning_tree(W, method, root)
    return simplify(tree, c_alpha, c_beta)


@dataclass
class BasisTree:
    tree: MergeTree | WeightedTree
    column: int | None
    scale: float = 1.0


def basis_trees(sketch: SketchResult, input_trees: list, n: int | None = None, method: str = "mst",
                c_alpha: float = 1.0, c_beta: float = 1.0, roots: list[int] | None = None) -> list[BasisTree]:
    """Basis trees of a sketch.

    Column-subset sketches return the selected input trees themselves.  NMF
    basis columns are unit-norm, so each is rescaled by the median of its
    coefficient row before being turned into a tree.
    """
    if sketch.basis_indices is not None:
        return [BasisTree(input_trees[i], i) for i in sketch.basis_indices]
    if n is None:
        raise ValueError("n is required to reconstruct NMF basis trees")
    out = []
    for j in range(sketch.k):
        scale = float(np.median(sketch.Y[j]))
        root = 0 if roots is None else roots[j]
        tree = reconstruct_sketched_tree(sketch.B[:, j] * scale, n, method, c_alpha, c_beta, root)
        out.append(BasisTree(tree, None, scale))
    return out
