import os
import subprocess
import sys

import numpy as np
import pytest

from mtsketch import _pykernels as py
from mtsketch import kernels

try:
    from mtsketch import _ckernels as ck
except ImportError:  # extension not built
    ck = None

needs_ext = pytest.mark.skipif(ck is None, reason="compiled extension not built")


@needs_ext
def test_merge_sweep_matches(rng):
    for conn in (4, 8):
        for _ in range(20):
            w, h = rng.integers(1, 12, size=2)
            vals = rng.integers(0, 5, size=w * h).astype(float)
            a = py.merge_sweep(vals, int(w), int(h), conn)
            b = ck.merge_sweep(vals, int(w), int(h), conn)
            assert repr(a) == repr(b)


@needs_ext
def test_prim_matches(rng):
    for _ in range(20):
        n = int(rng.integers(1, 25))
        W = rng.integers(1, 5, size=(n, n)).astype(float)
        W = W + W.T
        np.fill_diagonal(W, 0)
        assert repr(py.prim_mst(W)) == repr(ck.prim_mst(W))


@needs_ext
def test_tree_distances_match(rng):
    for _ in range(20):
        n = int(rng.integers(1, 30))
        us = np.array([int(rng.integers(0, i)) for i in range(1, n)], dtype=np.int64)
        vs = np.arange(1, n, dtype=np.int64)
        ws = rng.uniform(0.1, 2, size=n - 1)
        assert np.array_equal(py.tree_distances(n, us, vs, ws), ck.tree_distances(n, us, vs, ws))


@needs_ext
def test_transport_simplex_matches(rng):
    for _ in range(20):
        m, n = rng.integers(1, 10, size=2)
        a = rng.uniform(0.1, 1, size=m)
        b = rng.uniform(0.1, 1, size=n)
        a /= a.sum()
        b /= b.sum()
        cost = rng.uniform(size=(m, n))
        pa, pb = py.transport_simplex(a, b, cost), ck.transport_simplex(a, b, cost)
        Pa, Pb = pa[0] if isinstance(pa, tuple) else pa, pb[0] if isinstance(pb, tuple) else pb
        assert abs(np.sum(Pa * cost) - np.sum(Pb * cost)) <= 1e-12


def test_transport_simplex_optimal_vs_linprog(rng):
    from scipy.optimize import linprog

    for _ in range(10):
        m, n = rng.integers(2, 7, size=2)
        a = np.full(m, 1 / m)
        b = np.full(n, 1 / n)
        cost = rng.uniform(size=(m, n))
        out = kernels.transport_simplex(a, b, cost)
        P = out[0] if isinstance(out, tuple) else out
        A_eq = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
        ref = linprog(cost.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), method="highs")
        assert abs(np.sum(P * cost) - ref.fun) <= 1e-10
        assert np.allclose(P.sum(1), a, atol=1e-12) and np.allclose(P.sum(0), b, atol=1e-12)


def test_pure_python_switch():
    env = dict(os.environ, MTSKETCH_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", "from mtsketch import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == py.BACKEND
