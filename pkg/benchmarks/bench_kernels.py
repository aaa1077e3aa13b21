"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from mtsketch import _pykernels

try:
    from mtsketch import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def random_tree(rng, n):
    parents = [int(rng.integers(0, i)) for i in range(1, n)]
    us = np.arange(1, n, dtype=np.int64)
    vs = np.array(parents, dtype=np.int64)
    return us, vs, rng.uniform(0.5, 2.0, n - 1)


def cases(rng):
    grid = rng.standard_normal(128 * 128)
    pts = rng.uniform(size=(80, 2))
    W = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    us, vs, ws = random_tree(rng, 200)
    a = rng.uniform(1, 2, 90)
    b = rng.uniform(1, 2, 30)
    a /= a.sum()
    b /= b.sum()
    M = rng.uniform(size=(90, 30))
    return {
        "merge_sweep 128x128": lambda k: k.merge_sweep(grid, 128, 128, 4),
        "prim_mst n=80": lambda k: k.prim_mst(W),
        "tree_distances n=200": lambda k: k.tree_distances(200, us, vs, ws),
        "transport_simplex 90x30": lambda k: k.transport_simplex(a, b, M),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="write timings to this file")
    args = parser.parse_args(argv)

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        row = {"kernel": name}
        for label, mod in backends.items():
            row[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        rows.append(row)

    header = f"{'kernel':<26}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for row in rows:
        c = row.get("cython")
        cy = f"{1e3 * c:14.3f}" if c is not None else f"{'n/a':>14}"
        speed = f"{row['python'] / c:9.1f}x" if c else f"{'':>10}"
        print(f"{row['kernel']:<26}{1e3 * row['python']:14.3f}{cy}{speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
