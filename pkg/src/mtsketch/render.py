"""Merge tree layout and SVG / DOT output."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import groupby
from xml.sax.saxutils import escape

import numpy as np

from .mtree import MergeTree, WeightedTree

DEFAULT_STYLE = {
    "leaf": "#d62728",
    "saddle": "#ffffff",
    "root": "#1f77b4",
    "stroke": "#333333",
    "edge": "#555555",
    "radius": 4.0,
    "width": 480,
    "height": 360,
    "margin": 30,
    "curves": ["#1f77b4", "#d62728"],
}


def _weighted(tree) -> WeightedTree:
    if isinstance(tree, MergeTree):
        wt = tree.to_weighted()
        wt.root = tree.root
        return wt
    return tree


def balanced_root(tree) -> int:
    """Node minimizing the sum of tree distances to all others (lowest id on ties)."""
    wt = _weighted(tree)
    if not wt.ids:
        raise ValueError("empty tree")
    sums = wt.distances().sum(axis=1)
    best = sums.min()
    slack = 1e-12 * max(1.0, abs(best))
    return min(node for node, s in zip(wt.ids, sums) if s <= best + slack)


@dataclass
class TreeLayout:
    positions: dict[int, tuple[float, float]]
    root: int
    strategy: str
    edges: list[tuple[int, int, float]] = field(default_factory=list)  # (parent, child, weight)
    roles: dict[int, str] = field(default_factory=dict)


def center_out(nodes: list) -> list:
    """Left-to-right order ``c_t, c_{t-2}, ..., c_1, c_2, ..., c_{t-1}`` (1-based input order)."""
    left = nodes[0::2][::-1]
    right = nodes[1::2]
    return left + right


def order_children(children, sizes, dist) -> list:
    """Subtree size ascending; equal sizes by distance descending, then center-out."""
    by_size = sorted(children, key=lambda c: (sizes[c], c))
    out = []
    for _, group in groupby(by_size, key=lambda c: sizes[c]):
        group = sorted(group, key=lambda c: (-dist[c], c))
        out.extend(center_out(group) if len(group) > 1 else group)
    return out


def layout_tree(tree, strategy: str = "balanced", tracked_root: int | None = None) -> TreeLayout:
    """Place ``tree`` with its root at (0, 0) and children drawn downward by edge weight.

    Leaves sit at unit horizontal gaps in the heuristic left-to-right order;
    every internal node is centered over the span of its children.
    """
    wt = _weighted(tree)
    if strategy == "balanced":
        root = balanced_root(wt)
    elif strategy == "root-aligned":
        if tracked_root is None:
            raise ValueError("root-aligned layout requires tracked_root")
        root = tracked_root
    else:
        raise ValueError(f"unknown layout strategy {strategy!r}")
    adj = wt.adjacency()
    if root not in adj:
        raise ValueError(f"root {root} is not a node of the tree")

    children: dict[int, list[int]] = {}
    dist = {root: 0.0}
    order = [root]
    parent = {root: None}
    for x in order:
        kids = sorted(y for y in adj[x] if y != parent[x])
        children[x] = kids
        for y in kids:
            parent[y] = x
            dist[y] = adj[x][y]
            order.append(y)
    sizes = {}
    for x in reversed(order):
        sizes[x] = 1 + sum(sizes[c] for c in children[x])
    for x in order:
        children[x] = order_children(children[x], sizes, dist)

    ys = {root: 0.0}
    for x in order:
        for c in children[x]:
            ys[c] = ys[x] - adj[x][c]
    xs: dict[int, float] = {}
    next_leaf = 0
    stack = [(root, False)]
    # iterative post-order so deep paths do not hit the recursion limit
    while stack:
        x, done = stack.pop()
        if not children[x]:
            xs[x] = float(next_leaf)
            next_leaf += 1
        elif done:
            xs[x] = 0.5 * (xs[children[x][0]] + xs[children[x][-1]])
        else:
            stack.append((x, True))
            stack.extend((c, False) for c in reversed(children[x]))
    shift = xs[root]
    positions = {x: (xs[x] - shift, ys[x]) for x in order}
    edges = [(x, c, adj[x][c]) for x in order for c in children[x]]
    roles = {x: "root" if x == root else ("leaf" if not children[x] else "saddle") for x in order}
    return TreeLayout(positions, root, strategy, edges, roles)


# ---------------------------------------------------------------------------
# SVG


def _f(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".") if x != 0 else "0"


def _svg_open(w, h):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
    ]


def _svg_tree(layout: TreeLayout, style: dict) -> str:
    w, h, m = style["width"], style["height"], style["margin"]
    pts = np.array(list(layout.positions.values()), dtype=float)
    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    sx = (w - 2 * m) / (xmax - xmin) if xmax > xmin else 0.0
    sy = (h - 2 * m) / (ymax - ymin) if ymax > ymin else 0.0

    def screen(node):
        x, y = layout.positions[node]
        px = m + (x - xmin) * sx if sx else w / 2
        py = m + (ymax - y) * sy if sy else h / 2  # higher values drawn higher
        return px, py

    out = _svg_open(w, h)
    out.append(f'<g stroke="{style["edge"]}" stroke-width="1.5">')
    for u, v, _ in layout.edges:
        (x1, y1), (x2, y2) = screen(u), screen(v)
        out.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"/>')
    out.append("</g>")
    out.append(f'<g stroke="{style["stroke"]}" stroke-width="1">')
    for node in layout.positions:
        px, py = screen(node)
        fill = style[layout.roles.get(node, "saddle")]
        out.append(
            f'<circle id="n{node}" cx="{_f(px)}" cy="{_f(py)}" r="{_f(style["radius"])}" fill="{fill}">'
            f"<title>{escape(str(node))}</title></circle>"
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _svg_curves(rows, style: dict) -> str:
    """Error curves from ``(k, sketch error, gw loss)`` rows; the GW column may be None."""
    w, h, m = style["width"], style["height"], style["margin"]
    out = _svg_open(w, h)
    out.append(f'<g stroke="{style["stroke"]}" stroke-width="1">')
    out.append(f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}"/>')
    out.append(f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}"/>')
    out.append("</g>")
    rows = [tuple(r) for r in rows]
    if rows:
        ks = np.array([r[0] for r in rows], dtype=float)
        kmin, kmax = ks.min(), ks.max()
        for col, color in zip((1, 2), style["curves"]):
            vals = [r[col] if len(r) > col else None for r in rows]
            if any(v is None for v in vals):
                continue
            vals = np.array(vals, dtype=float)
            top = vals.max() if vals.max() > 0 else 1.0
            pts = []
            for k, v in zip(ks, vals):
                px = m + ((k - kmin) / (kmax - kmin) if kmax > kmin else 0.5) * (w - 2 * m)
                py = h - m - (v / top) * (h - 2 * m)
                pts.append(f"{_f(px)},{_f(py)}")
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(pts)}"/>')
        for k in ks:
            px = m + ((k - kmin) / (kmax - kmin) if kmax > kmin else 0.5) * (w - 2 * m)
            out.append(f'<text x="{_f(px)}" y="{h - m + 14}" font-size="10" text-anchor="middle">{int(k)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(item, style: dict | None = None) -> str:
    """SVG 1.1 document for a :class:`TreeLayout` or a table of error-curve rows."""
    st = dict(DEFAULT_STYLE)
    st.update(style or {})
    if isinstance(item, TreeLayout):
        return _svg_tree(item, st)
    return _svg_curves(item, st)


def emit_dot(tree) -> str:
    """Undirected DOT graph with one node per tree node and weighted edges."""
    wt = _weighted(tree)
    lines = ["graph tree {"]
    for node in wt.ids:
        role = "root" if node == wt.root else "node"
        lines.append(f'  n{node} [label="{node}", class="{role}"];')
    for u, v, w in wt.edges:
        lines.append(f'  n{u} -- n{v} [weight="{w!r}", label="{w:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
