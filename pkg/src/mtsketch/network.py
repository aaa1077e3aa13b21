"""Measure networks built from merge trees, blowup, alignment and vectorization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, DegenerateInputError, ShapeError, StructureError
from .mtree import MergeTree, WeightedTree, _check_tree, validate


@dataclass
class MeasureNetwork:
    """Node set with symmetric pairwise weights ``W`` and probability ``p``.

    ``labels[i]`` is ``(original node id, copy index)``.
    """

    W: np.ndarray
    p: np.ndarray
    labels: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        n = self.W.shape[0]
        if self.W.ndim != 2 or self.W.shape != (n, n) or n < 1:
            raise ShapeError(f"W must be a non-empty square matrix, got shape {self.W.shape}")
        if self.p.shape != (n,):
            raise ShapeError(f"p has shape {self.p.shape}, expected ({n},)")
        if not self.labels:
            self.labels = [(i, 0) for i in range(n)]
        elif len(self.labels) != n:
            raise ShapeError(f"{len(self.labels)} labels for {n} nodes")

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def check(self, atol: float = 1e-12) -> None:
        if not np.array_equal(self.W, self.W.T):
            raise StructureError("W is not symmetric")
        if np.any(np.diag(self.W) != 0):
            raise StructureError("W has a nonzero diagonal")
        if np.any(self.W < 0) or not np.all(np.isfinite(self.W)):
            raise StructureError("W must be finite and nonnegative")
        if np.any(self.p < 0) or abs(self.p.sum() - 1.0) > atol:
            raise StructureError(f"p is not a probability vector (sum {self.p.sum()!r})")


def uniform_network(W, labels=None) -> MeasureNetwork:
    W = np.asarray(W, dtype=np.float64)
    return MeasureNetwork(W, np.full(W.shape[0], 1.0 / W.shape[0]), labels or [])


def to_network(tree: MergeTree | WeightedTree) -> MeasureNetwork:
    """Shortest-path metric of the tree (edge weight ``|f(u) - f(v)|``), uniform measure."""
    if isinstance(tree, MergeTree):
        problems = validate(tree)
        if problems:
            raise StructureError("invalid merge tree: " + "; ".join(problems))
        tree = tree.to_weighted()
    else:
        _check_tree(tree)
    D = tree.distances()
    return uniform_network(D, [(i, 0) for i in tree.ids])


# ---------------------------------------------------------------------------
# binarization and blowup


def binarize_keep_max(C: np.ndarray, n: int | None = None) -> np.ndarray:
    """Keep a single 1 per row at the row's largest entry (lowest column on ties)."""
    C = np.asarray(C, dtype=np.float64)
    if n is not None and C.shape[0] != n:
        raise ShapeError(f"coupling has {C.shape[0]} rows, expected {n}")
    zero_rows = np.flatnonzero(~np.any(C > 0, axis=1))
    if zero_rows.size:
        raise DegenerateInputError(f"coupling rows {zero_rows.tolist()} carry no mass")
    out = np.zeros(C.shape, dtype=np.int8)
    out[np.arange(C.shape[0]), np.argmax(C, axis=1)] = 1
    return out


def repair_coverage(Cbin: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Reassign rows so every column is matched at least once.

    An uncovered column takes the row with the most coupling mass on it among
    rows whose current column is matched more than once.  Columns are
    repaired in order of decreasing total mass.
    """
    Cbin = np.array(Cbin, dtype=np.int8, copy=True)
    C = np.asarray(C, dtype=np.float64)
    nrows, ncols = Cbin.shape
    if nrows < ncols:
        raise CoverageError(f"{nrows} reference rows cannot cover {ncols} nodes")
    match = np.argmax(Cbin, axis=1)
    counts = np.bincount(match, minlength=ncols)
    for j in sorted(np.flatnonzero(counts == 0).tolist(), key=lambda j: (-C[:, j].sum(), j)):
        donors = np.flatnonzero(counts[match] > 1)
        r = int(donors[np.argmax(C[donors, j])])
        counts[match[r]] -= 1
        match[r] = j
        counts[j] += 1
    out = np.zeros_like(Cbin)
    out[np.arange(nrows), match] = 1
    return out


def _matching(Cbin: np.ndarray) -> np.ndarray:
    Cbin = np.asarray(Cbin)
    if Cbin.ndim != 2 or np.any((Cbin != 0) & (Cbin != 1)) or np.any(Cbin.sum(axis=1) != 1):
        raise StructureError("matching must be binary with exactly one 1 per row")
    return np.argmax(Cbin, axis=1)


def blowup(G: MeasureNetwork, Cbin: np.ndarray) -> MeasureNetwork:
    """Copy each node of ``G`` once per reference row matched to it.

    Nodes are ordered by original node, then copy index.  Copies sit at
    mutual distance 0 and share their node's mass equally.
    """
    match = _matching(Cbin)
    if Cbin.shape[1] != G.n:
        raise ShapeError(f"matching has {Cbin.shape[1]} columns for a {G.n}-node network")
    counts = np.bincount(match, minlength=G.n)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise CoverageError(f"nodes {missing.tolist()} are matched by no reference row")
    src = np.repeat(np.arange(G.n), counts)
    copy = np.concatenate([np.arange(c) for c in counts])
    W = G.W[np.ix_(src, src)]
    p = G.p[src] / counts[src]
    labels = [(G.labels[s][0], int(k)) for s, k in zip(src.tolist(), copy.tolist())]
    return MeasureNetwork(W, p, labels)


def blowup_permutation(Cbin: np.ndarray) -> np.ndarray:
    """Permutation taking :func:`blowup` node order to reference-row order."""
    match = _matching(Cbin)
    n = len(match)
    order = np.argsort(match, kind="stable")  # blown-up node k <- reference row order[k]
    P = np.zeros((n, n), dtype=np.int8)
    P[order, np.arange(n)] = 1
    return P


def align(Gb: MeasureNetwork, P: np.ndarray) -> MeasureNetwork:
    """Reorder nodes so that new node ``r`` is old node ``k`` with ``P[r, k] == 1``."""
    P = np.asarray(P)
    n = Gb.n
    if (P.shape != (n, n) or np.any((P != 0) & (P != 1))
            or np.any(P.sum(axis=0) != 1) or np.any(P.sum(axis=1) != 1)):
        raise StructureError("alignment requires an n x n permutation matrix")
    perm = np.argmax(P, axis=1)
    return MeasureNetwork(Gb.W[np.ix_(perm, perm)], Gb.p[perm], [Gb.labels[k] for k in perm.tolist()])


def blow_up_and_align(G: MeasureNetwork, C: np.ndarray) -> tuple[MeasureNetwork, np.ndarray]:
    """Keep-max binarize a reference-by-``G`` coupling, repair coverage, blow up and align.

    Returns the aligned network and the row matching (reference row -> node of ``G``).
    """
    Cbin = repair_coverage(binarize_keep_max(C), C)
    aligned = align(blowup(G, Cbin), blowup_permutation(Cbin))
    return aligned, np.argmax(Cbin, axis=1)


# ---------------------------------------------------------------------------
# vectorization


def vectorize(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ShapeError(f"expected a square matrix, got {W.shape}")
    return W[np.triu_indices(n)].copy()


def devectorize(a: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (n * (n + 1) // 2,):
        raise ShapeError(f"length {a.shape} does not match n(n+1)/2 = {n * (n + 1) // 2} for n={n}")
    W = np.zeros((n, n))
    iu = np.triu_indices(n)
    W[iu] = a
    W.T[iu] = a
    return W


def side_length(d: int) -> int:
    """Invert ``d = n(n+1)/2``."""
    n = int((np.sqrt(8 * d + 1) - 1) // 2)
    if n * (n + 1) // 2 != d:
        raise ShapeError(f"{d} is not a triangular number")
    return n
