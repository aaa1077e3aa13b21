# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

BACKEND = "cython"


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def merge_sweep(values, Py_ssize_t width, Py_ssize_t height, int connectivity=4):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t size = width * height
    cdef Py_ssize_t[::1] order = np.argsort(vals, kind="stable").astype(np.intp)
    cdef Py_ssize_t[::1] rank = np.empty(size, dtype=np.intp)
    cdef Py_ssize_t[::1] uf = np.arange(size, dtype=np.intp)
    cdef Py_ssize_t[::1] usize = np.ones(size, dtype=np.intp)
    cdef Py_ssize_t[::1] comp_node = np.arange(size, dtype=np.intp)
    cdef char[::1] is_node = np.zeros(size, dtype=np.int8)
    cdef Py_ssize_t[::1] children = np.empty(size, dtype=np.intp)
    cdef Py_ssize_t[::1] parents = np.empty(size, dtype=np.intp)
    cdef Py_ssize_t roots[8]
    cdef int dr8[8]
    cdef int dc8[8]
    cdef int noff, k, q, nroots, found
    cdef Py_ssize_t i, v, r, c, rr, cc, w, rw, top, nedges = 0, last
    if connectivity == 4:
        noff = 4
        dr8[:4] = [-1, 1, 0, 0]
        dc8[:4] = [0, 0, -1, 1]
    else:
        noff = 8
        dr8[:] = [-1, -1, -1, 0, 0, 1, 1, 1]
        dc8[:] = [-1, 0, 1, -1, 1, -1, 0, 1]
    for i in range(size):
        rank[order[i]] = i
    for i in range(size):
        v = order[i]
        r = v // width
        c = v - r * width
        nroots = 0
        for k in range(noff):
            rr = r + dr8[k]
            cc = c + dc8[k]
            if rr < 0 or rr >= height or cc < 0 or cc >= width:
                continue
            w = rr * width + cc
            if rank[w] < rank[v]:
                rw = _find(uf, w)
                found = 0
                for q in range(nroots):
                    if roots[q] == rw:
                        found = 1
                        break
                if not found:
                    roots[nroots] = rw
                    nroots += 1
        if nroots == 0:
            is_node[v] = 1
            comp_node[v] = v
            continue
        if nroots == 1:
            rw = roots[0]
            uf[v] = rw
            usize[rw] += 1
            continue
        is_node[v] = 1
        top = v
        for q in range(nroots):
            rw = roots[q]
            children[nedges] = comp_node[rw]
            parents[nedges] = v
            nedges += 1
            if usize[rw] > usize[top]:
                uf[top] = rw
                usize[rw] += usize[top]
                top = rw
            else:
                uf[rw] = top
                usize[top] += usize[rw]
        comp_node[top] = v
    last = order[size - 1]
    if not is_node[last]:
        children[nedges] = comp_node[_find(uf, last)]
        parents[nedges] = last
        nedges += 1
    return (np.asarray(children[:nedges]).astype(np.int64),
            np.asarray(parents[:nedges]).astype(np.int64),
            int(last))


cdef inline bint _less(double w1, Py_ssize_t a1, Py_ssize_t b1,
                       double w2, Py_ssize_t a2, Py_ssize_t b2) noexcept nogil:
    if w1 != w2:
        return w1 < w2
    if a1 != a2:
        return a1 < a2
    return b1 < b2


def prim_mst(W):
    cdef double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t n = Wv.shape[0]
    if n <= 1:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    cdef char[::1] in_tree = np.zeros(n, dtype=np.int8)
    cdef double[::1] best_w = np.full(n, INFINITY)
    cdef Py_ssize_t[::1] best_a = np.full(n, n, dtype=np.intp)
    cdef Py_ssize_t[::1] best_b = np.full(n, n, dtype=np.intp)
    cdef Py_ssize_t[::1] us = np.empty(n - 1, dtype=np.intp)
    cdef Py_ssize_t[::1] vs = np.empty(n - 1, dtype=np.intp)
    cdef Py_ssize_t it, v, pick, current = 0, a, b
    cdef double w
    in_tree[0] = 1
    with nogil:
        for it in range(n - 1):
            for v in range(n):
                if in_tree[v]:
                    continue
                w = Wv[current, v]
                if current < v:
                    a = current
                    b = v
                else:
                    a = v
                    b = current
                if _less(w, a, b, best_w[v], best_a[v], best_b[v]):
                    best_w[v] = w
                    best_a[v] = a
                    best_b[v] = b
            pick = -1
            for v in range(n):
                if in_tree[v]:
                    continue
                if pick < 0 or _less(best_w[v], best_a[v], best_b[v],
                                     best_w[pick], best_a[pick], best_b[pick]):
                    pick = v
            us[it] = best_a[pick]
            vs[it] = best_b[pick]
            in_tree[pick] = 1
            current = pick
    ua = np.asarray(us).astype(np.int64)
    va = np.asarray(vs).astype(np.int64)
    idx = np.lexsort((va, ua))
    return ua[idx], va[idx]


def tree_distances(Py_ssize_t n, us, vs, ws):
    cdef Py_ssize_t[::1] u = np.ascontiguousarray(us, dtype=np.intp)
    cdef Py_ssize_t[::1] v = np.ascontiguousarray(vs, dtype=np.intp)
    cdef double[::1] w = np.ascontiguousarray(ws, dtype=np.float64)
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t[::1] deg = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] nbr = np.empty(2 * m, dtype=np.intp)
    cdef double[::1] nw = np.empty(2 * m, dtype=np.float64)
    cdef Py_ssize_t[::1] fill = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] queue = np.empty(n, dtype=np.intp)
    cdef char[::1] seen = np.zeros(n, dtype=np.int8)
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    cdef Py_ssize_t e, s, x, y, head, tail, p
    for e in range(m):
        deg[u[e] + 1] += 1
        deg[v[e] + 1] += 1
    for s in range(n):
        deg[s + 1] += deg[s]
    for e in range(m):
        p = deg[u[e]] + fill[u[e]]
        nbr[p] = v[e]
        nw[p] = w[e]
        fill[u[e]] += 1
        p = deg[v[e]] + fill[v[e]]
        nbr[p] = u[e]
        nw[p] = w[e]
        fill[v[e]] += 1
    with nogil:
        for s in range(n):
            for x in range(n):
                seen[x] = 0
            seen[s] = 1
            head = 0
            tail = 1
            queue[0] = s
            while head < tail:
                x = queue[head]
                head += 1
                for p in range(deg[x], deg[x + 1]):
                    y = nbr[p]
                    if not seen[y]:
                        seen[y] = 1
                        D[s, y] = D[s, x] + nw[p]
                        queue[tail] = y
                        tail += 1
    return out


def transport_simplex(a, b, cost, Py_ssize_t max_iter=0, double tol=0.0):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] C = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t m = C.shape[0], n = C.shape[1]
    cdef Py_ssize_t nn = m + n, nb = m + n - 1
    if max_iter <= 0:
        max_iter = 50 * nn * nn + 1000
    if tol <= 0.0:
        tol = 1e-12 * (1.0 + float(np.max(np.abs(np.asarray(C)))))
    cdef double[::1] ra = np.array(av, copy=True)
    cdef double[::1] rb = np.array(bv, copy=True)
    cdef Py_ssize_t[::1] bi = np.empty(nb, dtype=np.intp)
    cdef Py_ssize_t[::1] bj = np.empty(nb, dtype=np.intp)
    cdef double[::1] flow = np.empty(nb, dtype=np.float64)
    cdef double[::1] u = np.zeros(m)
    cdef double[::1] v = np.zeros(n)
    cdef Py_ssize_t[::1] deg = np.zeros(nn + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] fill = np.zeros(nn, dtype=np.intp)
    cdef Py_ssize_t[::1] nbr = np.empty(2 * nb, dtype=np.intp)
    cdef Py_ssize_t[::1] nedge = np.empty(2 * nb, dtype=np.intp)
    cdef Py_ssize_t[::1] par = np.empty(nn, dtype=np.intp)
    cdef Py_ssize_t[::1] par_edge = np.empty(nn, dtype=np.intp)
    cdef Py_ssize_t[::1] depth = np.empty(nn, dtype=np.intp)
    cdef char[::1] seen = np.empty(nn, dtype=np.int8)
    cdef Py_ssize_t[::1] queue = np.empty(nn, dtype=np.intp)
    cdef Py_ssize_t[::1] side_x = np.empty(nn, dtype=np.intp)
    cdef Py_ssize_t[::1] side_y = np.empty(nn, dtype=np.intp)
    cdef Py_ssize_t[::1] path = np.empty(nn, dtype=np.intp)
    cdef Py_ssize_t i = 0, j = 0, e, k, it, x, y, head, tail, p, nx_, ny_, plen, leave, ei = 0, ej = 0
    cdef double xflow, best, r, theta
    cdef bint converged = False
    with nogil:
        # northwest corner
        e = 0
        while True:
            xflow = ra[i] if ra[i] < rb[j] else rb[j]
            if xflow < 0.0:
                xflow = 0.0
            bi[e] = i
            bj[e] = j
            flow[e] = xflow
            e += 1
            ra[i] -= xflow
            rb[j] -= xflow
            if i == m - 1 and j == n - 1:
                break
            if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
                i += 1
            else:
                j += 1
        for it in range(max_iter):
            for x in range(nn + 1):
                deg[x] = 0
            for x in range(nn):
                fill[x] = 0
            for e in range(nb):
                deg[bi[e] + 1] += 1
                deg[m + bj[e] + 1] += 1
            for x in range(nn):
                deg[x + 1] += deg[x]
            for e in range(nb):
                x = bi[e]
                y = m + bj[e]
                p = deg[x] + fill[x]
                nbr[p] = y
                nedge[p] = e
                fill[x] += 1
                p = deg[y] + fill[y]
                nbr[p] = x
                nedge[p] = e
                fill[y] += 1
            for x in range(nn):
                seen[x] = 0
                par[x] = -1
                par_edge[x] = -1
                depth[x] = 0
            seen[0] = 1
            u[0] = 0.0
            head = 0
            tail = 1
            queue[0] = 0
            while head < tail:
                x = queue[head]
                head += 1
                for p in range(deg[x], deg[x + 1]):
                    y = nbr[p]
                    if seen[y]:
                        continue
                    seen[y] = 1
                    e = nedge[p]
                    par[y] = x
                    par_edge[y] = e
                    depth[y] = depth[x] + 1
                    if y >= m:
                        v[y - m] = C[bi[e], bj[e]] - u[bi[e]]
                    else:
                        u[y] = C[bi[e], bj[e]] - v[bj[e]]
                    queue[tail] = y
                    tail += 1
            best = INFINITY
            for i in range(m):
                for j in range(n):
                    r = C[i, j] - u[i] - v[j]
                    if r < best:
                        best = r
                        ei = i
                        ej = j
            if best >= -tol:
                converged = True
                break
            x = m + ej
            y = ei
            nx_ = 0
            ny_ = 0
            while depth[x] > depth[y]:
                side_x[nx_] = par_edge[x]
                nx_ += 1
                x = par[x]
            while depth[y] > depth[x]:
                side_y[ny_] = par_edge[y]
                ny_ += 1
                y = par[y]
            while x != y:
                side_x[nx_] = par_edge[x]
                nx_ += 1
                x = par[x]
                side_y[ny_] = par_edge[y]
                ny_ += 1
                y = par[y]
            plen = 0
            for k in range(nx_):
                path[plen] = side_x[k]
                plen += 1
            for k in range(ny_ - 1, -1, -1):
                path[plen] = side_y[k]
                plen += 1
            leave = -1
            theta = INFINITY
            for k in range(0, plen, 2):
                e = path[k]
                if flow[e] < theta:
                    theta = flow[e]
                    leave = e
            for k in range(plen):
                e = path[k]
                if k % 2 == 0:
                    flow[e] -= theta
                else:
                    flow[e] += theta
            bi[leave] = ei
            bj[leave] = ej
            flow[leave] = theta
    plan = np.zeros((m, n))
    cdef double[:, ::1] P = plan
    for e in range(nb):
        P[bi[e], bj[e]] += flow[e]
    np.maximum(plan, 0.0, out=plan)
    return plan, bool(converged)
