"""Pure-Python reference implementations of the hot kernels.

These mirror ``_ckernels.pyx`` line for line in algorithmic terms; the
compiled module is preferred when it imports.  Both must return identical
results on identical inputs.
"""

from __future__ import annotations

from collections import deque

import numpy as np

BACKEND = "python"


# ---------------------------------------------------------------------------
# merge-tree sweep


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def merge_sweep(values, width, height, connectivity=4):
    """Sublevel-set sweep over a row-major grid.

    Returns ``(children, parents, root)`` where each ``(children[e],
    parents[e])`` pair is a tree edge between critical cells (child lower
    in the sweep order) and ``root`` is the last cell swept.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    size = width * height
    order = np.argsort(values, kind="stable")
    rank = np.empty(size, dtype=np.int64)
    rank[order] = np.arange(size)
    if connectivity == 4:
        offsets = ((-1, 0), (1, 0), (0, -1), (0, 1))
    else:
        offsets = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))

    uf = list(range(size))
    usize = [1] * size
    comp_node = list(range(size))
    is_node = [False] * size
    children: list[int] = []
    parents: list[int] = []
    for v in order.tolist():
        r, c = divmod(v, width)
        roots = []
        for dr, dc in offsets:
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width:
                w = rr * width + cc
                if rank[w] < rank[v]:
                    rw = _find(uf, w)
                    if rw not in roots:
                        roots.append(rw)
        if not roots:
            is_node[v] = True
            comp_node[v] = v
            continue
        if len(roots) == 1:
            rw = roots[0]
            uf[v] = rw
            usize[rw] += 1
            continue
        is_node[v] = True
        top = v
        for rw in roots:
            children.append(comp_node[rw])
            parents.append(v)
            if usize[rw] > usize[top]:
                uf[top] = rw
                usize[rw] += usize[top]
                top = rw
            else:
                uf[rw] = top
                usize[top] += usize[rw]
        comp_node[top] = v
    last = int(order[-1])
    if not is_node[last]:
        children.append(comp_node[_find(uf, last)])
        parents.append(last)
    return np.array(children, dtype=np.int64), np.array(parents, dtype=np.int64), last


# ---------------------------------------------------------------------------
# minimum spanning tree


def prim_mst(W):
    """Dense Prim on a complete graph.

    Edges are compared on ``(weight, min(u, v), max(u, v))`` so the result is
    the unique MST under that strict order, i.e. the lexicographic Kruskal
    tree.  Returns ``(u, v)`` arrays with ``u < v`` sorted lexicographically.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    n = W.shape[0]
    if n <= 1:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    in_tree = np.zeros(n, dtype=bool)
    best_w = np.full(n, np.inf)
    best_a = np.full(n, n, dtype=np.int64)
    best_b = np.full(n, n, dtype=np.int64)
    us, vs = [], []
    current = 0
    in_tree[0] = True
    for _ in range(n - 1):
        for v in range(n):
            if in_tree[v]:
                continue
            w = W[current, v]
            a, b = (current, v) if current < v else (v, current)
            if (w, a, b) < (best_w[v], best_a[v], best_b[v]):
                best_w[v], best_a[v], best_b[v] = w, a, b
        pick = -1
        for v in range(n):
            if in_tree[v]:
                continue
            if pick < 0 or (best_w[v], best_a[v], best_b[v]) < (best_w[pick], best_a[pick], best_b[pick]):
                pick = v
        us.append(int(best_a[pick]))
        vs.append(int(best_b[pick]))
        in_tree[pick] = True
        current = pick
    edges = sorted(zip(us, vs))
    return (np.array([e[0] for e in edges], dtype=np.int64),
            np.array([e[1] for e in edges], dtype=np.int64))


# ---------------------------------------------------------------------------
# tree metric


def tree_distances(n, us, vs, ws):
    """All-pairs path lengths in a weighted tree, one BFS per source."""
    adj = [[] for _ in range(n)]
    for u, v, w in zip(np.asarray(us).tolist(), np.asarray(vs).tolist(), np.asarray(ws).tolist()):
        adj[u].append((v, w))
        adj[v].append((u, w))
    D = np.zeros((n, n))
    for s in range(n):
        seen = [False] * n
        seen[s] = True
        row = D[s]
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y, w in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    row[y] = row[x] + w
                    queue.append(y)
    return D


# ---------------------------------------------------------------------------
# exact optimal transport (transportation simplex)


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    ra, rb = list(a), list(b)
    bi, bj, flow = [], [], []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        if x < 0.0:
            x = 0.0
        bi.append(i)
        bj.append(j)
        flow.append(x)
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return bi, bj, flow


def transport_simplex(a, b, cost, max_iter=0, tol=0.0):
    """Exact discrete optimal transport between histograms ``a`` and ``b``.

    Uses the transportation (u-v) simplex with a northwest-corner start and
    Dantzig pricing.  Returns ``(plan, converged)``; ``converged`` is False
    only when ``max_iter`` pivots were exhausted.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    m, n = cost.shape
    if max_iter <= 0:
        max_iter = 50 * (m + n) * (m + n) + 1000
    if tol <= 0.0:
        tol = 1e-12 * (1.0 + float(np.max(np.abs(cost))))
    bi, bj, flow = _northwest_corner(a.tolist(), b.tolist())
    nb = len(bi)
    nn = m + n
    u = np.zeros(m)
    v = np.zeros(n)
    converged = False
    for _ in range(max_iter):
        # potentials and BFS tree rooted at row 0
        adj = [[] for _ in range(nn)]
        for e in range(nb):
            adj[bi[e]].append((m + bj[e], e))
            adj[m + bj[e]].append((bi[e], e))
        par = [-1] * nn
        par_edge = [-1] * nn
        depth = [0] * nn
        seen = [False] * nn
        seen[0] = True
        u[0] = 0.0
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y, e in adj[x]:
                if seen[y]:
                    continue
                seen[y] = True
                par[y] = x
                par_edge[y] = e
                depth[y] = depth[x] + 1
                if y >= m:
                    v[y - m] = cost[bi[e], bj[e]] - u[bi[e]]
                else:
                    u[y] = cost[bi[e], bj[e]] - v[bj[e]]
                queue.append(y)
        reduced = cost - u[:, None] - v[None, :]
        flat = int(np.argmin(reduced))
        if reduced.flat[flat] >= -tol:
            converged = True
            break
        ei, ej = divmod(flat, n)
        # tree path between column node and row node
        x, y = m + ej, ei
        side_x, side_y = [], []
        while depth[x] > depth[y]:
            side_x.append(par_edge[x])
            x = par[x]
        while depth[y] > depth[x]:
            side_y.append(par_edge[y])
            y = par[y]
        while x != y:
            side_x.append(par_edge[x])
            x = par[x]
            side_y.append(par_edge[y])
            y = par[y]
        path = side_x + side_y[::-1]
        leave = -1
        theta = np.inf
        for k in range(0, len(path), 2):
            e = path[k]
            if flow[e] < theta:
                theta = flow[e]
                leave = e
        for k, e in enumerate(path):
            if k % 2 == 0:
                flow[e] -= theta
            else:
                flow[e] += theta
        bi[leave], bj[leave], flow[leave] = ei, ej, theta
    plan = np.zeros((m, n))
    for e in range(nb):
        plan[bi[e], bj[e]] += flow[e]
    np.maximum(plan, 0.0, out=plan)
    return plan, converged
