"""Column subset selection (LSS, IFS) and NMF sketches of a data matrix."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ValidationError


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass
class SketchResult:
    method: str
    k: int
    B: np.ndarray
    Y: np.ndarray
    basis_indices: list[int] | None = None
    seed: int = 0
    history: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def A_hat(self) -> np.ndarray:
        return self.B @ self.Y


def _check_k(A, k, upper=None):
    N = A.shape[1]
    upper = N if upper is None else upper
    if not 1 <= k <= upper:
        raise ValidationError(f"k={k} must lie in [1, {upper}]")


def pseudoinverse_project(B: np.ndarray, A: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Coefficients ``Y = pinv(B) @ A`` of the orthogonal projection of ``A`` onto span(B)."""
    B = np.asarray(B, dtype=np.float64)
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    cutoff = rcond * (s[0] if s.size else 0.0)
    keep = s > cutoff
    if keep.sum() < B.shape[1]:
        warnings.warn(f"basis has rank {int(keep.sum())} < {B.shape[1]}", RankDeficiencyWarning, stacklevel=2)
    return (Vt[keep].T / s[keep]) @ (U[:, keep].T @ A)


def residual_sq(A: np.ndarray, B: np.ndarray) -> float:
    """Squared Frobenius norm of ``A - B pinv(B) A``."""
    Q = _orthonormal(B)
    R = A - Q @ (Q.T @ A)
    return float(np.sum(R * R))


def _orthonormal(B, rcond=1e-12):
    if B.shape[1] == 0:
        return np.zeros((B.shape[0], 0))
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    return U[:, s > rcond * s[0]] if s[0] > 0 else np.zeros((B.shape[0], 0))


# ---------------------------------------------------------------------------
# length-squared sampling


def lss(A: np.ndarray, k: int, seed: int = 0, randomized: bool = False) -> SketchResult:
    """Length-squared column selection with deflation.

    Each pick is the remaining column with the largest residual norm (or,
    with ``randomized``, one drawn with probability proportional to the
    squared residual norms); its direction is then projected out of every
    remaining column.
    """
    A = np.asarray(A, dtype=np.float64)
    _check_k(A, k)
    if not np.any(A):
        raise DegenerateInputError("cannot sample columns of an all-zero matrix")
    rng = np.random.default_rng(seed)
    R = A.copy()
    remaining = list(range(A.shape[1]))
    chosen = []
    for _ in range(k):
        norms = np.einsum("ij,ij->j", R[:, remaining], R[:, remaining])
        if randomized and norms.sum() > 0:
            pos = int(rng.choice(len(remaining), p=norms / norms.sum()))
        else:
            pos = int(np.argmax(norms))
        c = remaining.pop(pos)
        chosen.append(c)
        length = np.linalg.norm(R[:, c])
        if length > 0 and remaining:
            u = R[:, c] / length
            R[:, remaining] -= np.outer(u, u @ R[:, remaining])
    B = A[:, chosen]
    return SketchResult("LSS", k, B, pseudoinverse_project(B, A), chosen, seed)


# ---------------------------------------------------------------------------
# iterative feature selection


def _swap_objectives(A, others, G_total):
    """Residual after adding each column of ``A`` to the span of ``others``."""
    Q = _orthonormal(A[:, others])
    R = A - Q @ (Q.T @ A)
    base = float(np.sum(R * R))
    G = R.T @ R
    diag = np.diag(G).copy()
    gain = np.zeros_like(diag)
    live = diag > 1e-14 * max(G_total, 1e-300)
    gain[live] = np.einsum("ij,ij->i", G[live], G[live]) / diag[live]
    return base - gain


def ifs(A: np.ndarray, k: int, seed: int = 0, max_sweeps: int = 100, init: list[int] | None = None) -> SketchResult:
    """Iterative feature selection from a random initial subset.

    Every position of the current subset is revisited in turn and its column
    replaced by whichever column (the current one included) leaves the
    smallest projection residual.  The current column is only displaced by a
    strict improvement; other ties go to the lowest index.

    ``init`` replaces the random start; passing the previous subset plus one
    new column grows a solution incrementally, so the error cannot increase
    with ``k``.
    """
    A = np.asarray(A, dtype=np.float64)
    _check_k(A, k)
    N = A.shape[1]
    if init is not None:
        subset = [int(i) for i in init]
        if len(subset) != k or len(set(subset)) != k or not all(0 <= i < N for i in subset):
            raise ValidationError(f"init must hold {k} distinct column indices in [0, {N})")
    else:
        rng = np.random.default_rng(seed)
        subset = sorted(rng.choice(N, size=k, replace=False).tolist())
    total = float(np.sum(A * A))
    history = [residual_sq(A, A[:, subset])]
    converged = False
    for _ in range(max_sweeps):
        changed = False
        for j in range(k):
            others = subset[:j] + subset[j + 1:]
            obj = _swap_objectives(A, others, total)
            obj[others] = np.inf
            current = subset[j]
            best = int(np.argmin(obj))
            if best != current and obj[best] < obj[current] - 1e-12 * max(total, 1.0):
                subset[j] = best
                changed = True
                history.append(residual_sq(A, A[:, subset]))
        if not changed:
            converged = True
            break
    B = A[:, subset]
    return SketchResult("IFS", k, B, pseudoinverse_project(B, A), list(subset), seed, history, converged)


# ---------------------------------------------------------------------------
# NMF


def nndsvd(A: np.ndarray, k: int, fill: float = 1e-8):
    """Nonnegative double SVD initialization; exact zeros become ``fill``."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    B = np.zeros((A.shape[0], k))
    X = np.zeros((A.shape[1], k))
    B[:, 0] = np.sqrt(s[0]) * np.abs(U[:, 0])
    X[:, 0] = np.sqrt(s[0]) * np.abs(Vt[0])
    for j in range(1, k):
        u, v = U[:, j], Vt[j]
        up, un = np.maximum(u, 0), np.maximum(-u, 0)
        vp, vn = np.maximum(v, 0), np.maximum(-v, 0)
        nup, nun = np.linalg.norm(up), np.linalg.norm(un)
        nvp, nvn = np.linalg.norm(vp), np.linalg.norm(vn)
        if nup * nvp >= nun * nvn:
            uu, vv, sigma = up / nup if nup else up, vp / nvp if nvp else vp, nup * nvp
        else:
            uu, vv, sigma = un / nun if nun else un, vn / nvn if nvn else vn, nun * nvn
        B[:, j] = np.sqrt(s[j] * sigma) * uu
        X[:, j] = np.sqrt(s[j] * sigma) * vv
    B[B == 0] = fill
    X[X == 0] = fill
    return B, X


def nmf(A: np.ndarray, k: int, seed: int = 0, max_sweeps: int = 2000, tol: float = 1e-10) -> SketchResult:
    """Rank-one residue updates (HALS) from an NNDSVD start.

    Basis columns are kept at unit norm; each normalization moves the scale
    into the matching coefficient row so the product, and hence the
    residual, is unchanged by it.
    """
    A = np.asarray(A, dtype=np.float64)
    if np.any(A < 0):
        raise ValidationError("NMF requires an entrywise nonnegative matrix")
    _check_k(A, k, min(A.shape))
    if not np.any(A):
        return SketchResult("NMF", k, np.zeros((A.shape[0], k)), np.zeros((k, A.shape[1])), None, seed, [0.0])
    B, X = nndsvd(A, k)
    norms = np.linalg.norm(B, axis=0)
    B /= norms
    X *= norms
    E = A - B @ X.T
    history = [float(np.sum(E * E))]
    converged = False
    for _ in range(max_sweeps):
        for j in range(k):
            Q = E + np.outer(B[:, j], X[:, j])
            x = np.maximum(Q.T @ B[:, j], 0.0)
            xx = float(x @ x)
            if xx > 0:
                b = np.maximum(Q @ x, 0.0) / xx
                nb = np.linalg.norm(b)
                if nb > 0:
                    B[:, j] = b / nb
                    x = x * nb
                else:
                    x = np.zeros_like(x)
            X[:, j] = x
            E = Q - np.outer(B[:, j], X[:, j])
        history.append(float(np.sum(E * E)))
        if history[-2] - history[-1] <= tol * max(history[-2], 1e-300):
            converged = True
            break
    return SketchResult("NMF", k, B, X.T.copy(), None, seed, history, converged)


def sketch(A: np.ndarray, k: int, method: str, seed: int = 0, **options) -> SketchResult:
    method = method.lower()
    if method == "lss":
        return lss(A, k, seed, **options)
    if method == "ifs":
        return ifs(A, k, seed, **options)
    if method == "nmf":
        return nmf(A, k, seed, **options)
    raise ValueError(f"unknown sketch method {method!r}")
