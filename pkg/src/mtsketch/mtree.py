"""Merge trees: extraction from grids, validation, simplification, JSON I/O."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ParseError, StructureError
from .field import ScalarGrid


@dataclass
class MergeTree:
    """Rooted tree with a scalar value on every node.

    ``edges`` holds ``(child, parent)`` pairs; order inside a pair is not
    significant for consumers that treat the tree as undirected.
    """

    ids: list[int]
    f: np.ndarray
    edges: list[tuple[int, int]]
    root: int

    def __post_init__(self):
        self.ids = [int(i) for i in self.ids]
        self.f = np.asarray(self.f, dtype=np.float64)
        self.edges = [(int(u), int(v)) for u, v in self.edges]
        self.root = int(self.root)

    def __len__(self):
        return len(self.ids)

    @property
    def index(self) -> dict[int, int]:
        return {node: i for i, node in enumerate(self.ids)}

    def value(self, node: int) -> float:
        return float(self.f[self.index[node]])

    def to_weighted(self) -> "WeightedTree":
        idx = self.index
        return WeightedTree(
            list(self.ids),
            [(u, v, abs(float(self.f[idx[u]] - self.f[idx[v]]))) for u, v in self.edges],
            root=self.root,
        )

    def leaves(self) -> list[int]:
        deg = _degrees(self.ids, self.edges)
        if len(self.ids) == 1:
            return list(self.ids)
        return [i for i in self.ids if deg[i] == 1 and i != self.root]

    def to_json(self, provenance: dict | None = None) -> str:
        nodes = ",".join(f'{{"id":{i},"f":{_fmt(x)}}}' for i, x in zip(self.ids, self.f.tolist()))
        edges = ",".join(f"[{u},{v}]" for u, v in self.edges)
        text = f'{{"nodes":[{nodes}],"edges":[{edges}],"root":{self.root}'
        if provenance is not None:
            text += ',"provenance":' + json.dumps(provenance, sort_keys=True)
        return text + "}"

    @classmethod
    def from_json(cls, text: str) -> "MergeTree":
        try:
            data = json.loads(text)
            ids = [int(n["id"]) for n in data["nodes"]]
            f = [float(n["f"]) for n in data["nodes"]]
            edges = [(int(e[0]), int(e[1])) for e in data["edges"]]
            root = int(data["root"])
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            raise ParseError(f"malformed merge tree JSON: {exc}") from None
        return cls(ids, np.array(f), edges, root)

    def save(self, path, provenance: dict | None = None) -> None:
        Path(path).write_text(self.to_json(provenance) + "\n")

    @classmethod
    def load(cls, path) -> "MergeTree":
        return cls.from_json(Path(path).read_text())


def _fmt(x: float) -> str:
    text = f"{x:.17g}"
    if "." not in text and "e" not in text and "n" not in text:
        text += ".0"
    return text


@dataclass
class WeightedTree:
    """Unrooted-by-values tree with explicit edge weights.

    Produced by reconstruction; ``root`` is the tracked root id (or None) and
    ``members`` maps each surviving id to the input ids merged into it.
    """

    ids: list[int]
    edges: list[tuple[int, int, float]]
    root: int | None = None
    members: dict[int, list[int]] = field(default_factory=dict)

    def __len__(self):
        return len(self.ids)

    def distances(self) -> np.ndarray:
        idx = {node: i for i, node in enumerate(self.ids)}
        if not self.edges:
            return np.zeros((len(self.ids), len(self.ids)))
        us = np.array([idx[u] for u, _, _ in self.edges], dtype=np.int64)
        vs = np.array([idx[v] for _, v, _ in self.edges], dtype=np.int64)
        ws = np.array([w for _, _, w in self.edges], dtype=np.float64)
        return kernels.tree_distances(len(self.ids), us, vs, ws)

    def adjacency(self) -> dict[int, dict[int, float]]:
        adj: dict[int, dict[int, float]] = {i: {} for i in self.ids}
        for u, v, w in self.edges:
            adj[u][v] = w
            adj[v][u] = w
        return adj

    def to_merge_tree(self, root: int | None = None, root_value: float = 0.0) -> MergeTree:
        """Hang the tree from ``root``; every node sits at ``root_value - depth``."""
        root = self.root if root is None else root
        if root is None:
            root = min(self.ids)
        adj = self.adjacency()
        f = {root: root_value}
        edges = []
        stack = [root]
        while stack:
            x = stack.pop()
            for y, w in sorted(adj[x].items()):
                if y not in f:
                    f[y] = f[x] - w
                    edges.append((y, x))
                    stack.append(y)
        if len(f) != len(self.ids):
            raise StructureError("tree is not connected")
        return MergeTree(list(self.ids), np.array([f[i] for i in self.ids]), edges, root)


def _degrees(ids, edges):
    deg = {i: 0 for i in ids}
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return deg


# ---------------------------------------------------------------------------
# extraction


def extract_merge_tree(grid: ScalarGrid, connectivity: int | str = 4) -> MergeTree:
    """Merge tree of the sublevel-set filtration of ``grid``.

    Equal values are ordered by cell index.  Node ids are cell indices.
    Zero-length edges (plateaus) are contracted into their upper endpoint
    and regular nodes left behind by the contraction are spliced out.
    """
    connectivity = _parse_connectivity(connectivity)
    children, parents, root = kernels.merge_sweep(grid.values, grid.width, grid.height, connectivity)
    f = grid.values
    rep: dict[int, int] = {}
    for c, p in zip(children.tolist(), parents.tolist()):
        if f[c] == f[p]:
            rep[c] = p

    def top(x):
        while x in rep:
            x = rep[x]
        return x

    parent: dict[int, int] = {}
    for c, p in zip(children.tolist(), parents.tolist()):
        if f[c] != f[p]:
            parent[top(c)] = top(p)
    root = top(root)
    _splice_regular(parent, root)
    ids = sorted(set(parent) | {root})
    edges = sorted(parent.items())
    return MergeTree(ids, f[np.array(ids, dtype=np.int64)], edges, root)


def _parse_connectivity(connectivity) -> int:
    if connectivity in (4, "4", "4-neighbor"):
        return 4
    if connectivity in (8, "8", "8-neighbor"):
        return 8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity!r}")


def _splice_regular(parent: dict[int, int], root: int) -> None:
    kids: dict[int, list[int]] = defaultdict(list)
    for c, p in parent.items():
        kids[p].append(c)
    for x in sorted(kids):
        if x != root and x in parent and len(kids[x]) == 1:
            (child,) = kids[x]
            up = parent.pop(x)
            parent[child] = up
            kids[up].remove(x)
            kids[up].append(child)
            del kids[x]


# ---------------------------------------------------------------------------
# validation


def validate(tree: MergeTree) -> list[str]:
    """List every violated merge-tree invariant; empty means valid."""
    problems = []
    ids = tree.ids
    idset = set(ids)
    if len(idset) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        problems.append(f"duplicate node ids: {dupes}")
    if len(tree.f) != len(ids):
        problems.append(f"{len(ids)} node ids but {len(tree.f)} values")
        return problems
    if not np.all(np.isfinite(tree.f)):
        problems.append("non-finite node values")
    if tree.root not in idset:
        problems.append(f"root {tree.root} is not a node")
        return problems
    bad_edges = [(u, v) for u, v in tree.edges if u not in idset or v not in idset or u == v]
    if bad_edges:
        problems.append(f"edges with unknown endpoints or self-loops: {bad_edges}")
        return problems
    adj = defaultdict(list)
    for u, v in tree.edges:
        adj[u].append(v)
        adj[v].append(u)
    parent = {tree.root: None}
    order = [tree.root]
    cycle_edges = []
    for x in order:
        for y in adj[x]:
            if y == parent[x]:
                continue
            if y in parent:
                if (y, x) not in cycle_edges:
                    cycle_edges.append((x, y))
                continue
            parent[y] = x
            order.append(y)
    if cycle_edges or len(tree.edges) != len(ids) - 1:
        problems.append(f"acyclicity violated: {len(tree.edges)} edges for {len(ids)} nodes, cycle edges {cycle_edges}")
    unreached = sorted(idset - set(parent))
    if unreached:
        problems.append(f"connectivity violated: nodes {unreached} not reachable from root")
    val = dict(zip(ids, tree.f.tolist()))
    rootf = val[tree.root]
    higher = [i for i in ids if i != tree.root and val[i] >= rootf]
    if higher:
        problems.append(f"root {tree.root} is not the unique maximum: nodes {higher} have f >= {rootf}")
    nonmono = [(x, p) for x, p in parent.items() if p is not None and val[x] > val[p]]
    if nonmono:
        problems.append(f"monotonicity violated on (node, parent) pairs {nonmono}")
    regular = [x for x, p in parent.items() if p is not None and len(adj[x]) == 2]
    if regular:
        problems.append(f"non-critical internal nodes (one child): {regular}")
    return problems


# ---------------------------------------------------------------------------
# simplification of reconstructed trees


def _check_tree(tree: WeightedTree) -> dict[int, dict[int, float]]:
    n = len(tree.ids)
    if len(set(tree.ids)) != n:
        raise StructureError("duplicate node ids")
    if len(tree.edges) != n - 1:
        raise StructureError(f"{len(tree.edges)} edges cannot span {n} nodes as a tree")
    adj = tree.adjacency()
    if len(adj) != n:
        raise StructureError("edge endpoints outside the node set")
    seen = {tree.ids[0]}
    stack = [tree.ids[0]]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != n:
        raise StructureError("graph is not connected")
    if any(w < 0 for _, _, w in tree.edges):
        raise StructureError("negative edge weight")
    return adj


def simplify(tree: WeightedTree, c_alpha: float = 1.0, c_beta: float = 1.0) -> WeightedTree:
    """Collapse near-duplicate nodes of a reconstructed tree.

    With ``R`` the weighted diameter and ``n`` the node count of the input:
    edges of weight ``<= c_alpha * R / n**2`` are contracted, leaves within
    ``c_beta * R / n`` of their parent are merged into it, and the remaining
    degree-2 non-root nodes are spliced out with their edge weights summed.
    """
    if c_alpha <= 0 or c_beta <= 0:
        raise ValueError("c_alpha and c_beta must be positive")
    adj = _check_tree(tree)
    n = len(tree.ids)
    if n == 1:
        return WeightedTree(list(tree.ids), [], tree.root, {tree.ids[0]: [tree.ids[0]]})
    R = float(tree.distances().max())
    alpha = c_alpha * R / n**2
    beta = c_beta * R / n
    root = tree.root

    # 1. contract short edges
    group = {i: i for i in tree.ids}

    def find(x):
        while group[x] != x:
            group[x] = group[group[x]]
            x = group[x]
        return x

    for u, v, w in sorted(tree.edges, key=lambda e: (e[2], min(e[0], e[1]), max(e[0], e[1]))):
        if w <= alpha:
            a, b = find(u), find(v)
            keep, drop = (a, b) if (a == root or (b != root and a < b)) else (b, a)
            group[drop] = keep
    members: dict[int, list[int]] = defaultdict(list)
    for i in tree.ids:
        members[find(i)].append(i)
    adj = {g: {} for g in members}
    for u, v, w in tree.edges:
        a, b = find(u), find(v)
        if a != b:
            adj[a][b] = w
            adj[b][a] = w

    # 2. merge short leaves into their parent (one pass, leaves of the contracted tree)
    anchor = root if root is not None else min(adj)
    parent = _orient(adj, anchor)
    for x in sorted(adj):
        if x == anchor or len(adj[x]) != 1:
            continue
        p = parent[x]
        if adj[x][p] <= beta:
            members[p].extend(members.pop(x))
            del adj[p][x]
            del adj[x]

    # 3. splice regular nodes
    changed = True
    while changed:
        changed = False
        for x in sorted(adj):
            if x != anchor and len(adj[x]) == 2:
                (a, wa), (b, wb) = sorted(adj[x].items())
                del adj[a][x], adj[b][x]
                adj[a][b] = adj[b][a] = wa + wb
                del adj[x]
                members.pop(x)
                changed = True
    ids = sorted(adj)
    edges = sorted({(min(u, v), max(u, v), w) for u in adj for v, w in adj[u].items()})
    return WeightedTree(ids, edges, root, {k: sorted(v) for k, v in sorted(members.items())})


def _orient(adj, root):
    parent = {root: None}
    stack = [root]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                stack.append(y)
    return parent
