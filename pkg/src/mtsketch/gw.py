"""Gromov-Wasserstein couplings, distances and Frechet means of measure networks.

All distortions use the quadratic loss ``L(a, b) = |a - b|**2 / 2`` so that
the GW distance equals the minimal distortion.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from . import kernels
from .errors import ShapeError
from .network import MeasureNetwork, blow_up_and_align

log = logging.getLogger(__name__)


class NonConvergenceWarning(UserWarning):
    pass


@dataclass
class GwConfig:
    """Solver knobs.

    ``convergence_tolerance`` is the relative distortion change that stops
    the Frank-Wolfe loop.  ``restarts`` adds seeded random starting
    couplings to the cold-start set.
    """

    max_outer_iterations: int = 1000
    convergence_tolerance: float = 1e-9
    inner_solver: str = "exact"
    entropic_epsilon: float = 1e-2
    entropic_epsilon_final: float = 1e-4
    seed: int = 0
    restarts: int = 0
    max_mean_iterations: int = 100
    workers: int = 1

    def __post_init__(self):
        if self.inner_solver not in ("exact", "exact-transport", "entropic"):
            raise ValueError(f"unknown inner solver {self.inner_solver!r}")
        if self.max_outer_iterations < 1 or self.max_mean_iterations < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.convergence_tolerance <= 0 or self.entropic_epsilon <= 0 or self.entropic_epsilon_final <= 0:
            raise ValueError("tolerances must be positive")

    @classmethod
    def from_dict(cls, data: dict | None) -> "GwConfig":
        return cls(**(data or {}))


@dataclass
class CouplingResult:
    matrix: np.ndarray
    distortion: float
    converged: bool
    history: list[float] = field(default_factory=list)

    @property
    def C(self) -> np.ndarray:
        return self.matrix


# ---------------------------------------------------------------------------
# distortion


def distortion(C: np.ndarray, W1: np.ndarray, W2: np.ndarray) -> float:
    """Quadratic-loss distortion of ``C``, evaluated in O(n^3).

    Expands ``sum L(W1[i,k], W2[j,l]) C[i,j] C[k,l]`` into the two
    marginal terms minus the bilinear cross term.
    """
    C = np.asarray(C, dtype=np.float64)
    W1 = np.asarray(W1, dtype=np.float64)
    W2 = np.asarray(W2, dtype=np.float64)
    n1, n2 = C.shape
    if W1.shape != (n1, n1) or W2.shape != (n2, n2):
        raise ShapeError(f"coupling {C.shape} does not match weights {W1.shape} and {W2.shape}")
    r = C.sum(axis=1)
    c = C.sum(axis=0)
    value = 0.5 * (r @ (W1 * W1) @ r + c @ (W2 * W2) @ c) - np.sum(C * (W1 @ C @ W2.T))
    return max(float(value), 0.0)


# ---------------------------------------------------------------------------
# linear minimization oracles


def _exact_transport(a, b, M):
    plan, ok = kernels.transport_simplex(a, b, M)
    if ok:
        return plan
    log.info("transport simplex hit its pivot cap; falling back to HiGHS")
    m, n = M.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    res = linprog(M.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    return np.maximum(res.x.reshape(m, n), 0.0)


def _round_to_polytope(P, a, b):
    P = P * np.minimum(a / np.maximum(P.sum(axis=1), 1e-300), 1.0)[:, None]
    P = P * np.minimum(b / np.maximum(P.sum(axis=0), 1e-300), 1.0)[None, :]
    er = a - P.sum(axis=1)
    ec = b - P.sum(axis=0)
    total = er.sum()
    if total > 0:
        P = P + np.outer(er, ec) / total
    return P


def sinkhorn(a, b, M, epsilon=1e-2, epsilon_final=1e-4, tol=1e-12, max_iter=5000):
    """Log-domain Sinkhorn with geometric epsilon annealing, rounded onto the coupling polytope.

    ``epsilon`` is relative to ``max|M|``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = float(np.max(np.abs(M))) or 1.0
    K = M / scale
    la, lb = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    eps = epsilon
    while True:
        for _ in range(max_iter):
            f = eps * (la - logsumexp((g[None, :] - K) / eps, axis=1))
            g = eps * (lb - logsumexp((f[:, None] - K) / eps, axis=0))
            P = np.exp((f[:, None] + g[None, :] - K) / eps)
            if np.abs(P.sum(axis=1) - a).max() < tol:
                break
        if eps <= epsilon_final:
            break
        eps = max(eps * 0.5, epsilon_final)
    return _round_to_polytope(P, a, b)


def _oracle(a, b, M, cfg: GwConfig):
    if cfg.inner_solver == "entropic":
        return sinkhorn(a, b, M, cfg.entropic_epsilon, cfg.entropic_epsilon_final)
    return _exact_transport(a, b, M)


# ---------------------------------------------------------------------------
# Frank-Wolfe


def _frank_wolfe(W1, W2, a1, a2, C, cfg: GwConfig):
    const = 0.5 * (a1 @ (W1 * W1) @ a1 + a2 @ (W2 * W2) @ a2)
    gap_tol = 1e-15 * (1.0 + const)
    WCW = W1 @ C @ W2
    f = const - np.sum(C * WCW)
    history = [float(f)]
    converged = False
    for _ in range(cfg.max_outer_iterations):
        grad = -2.0 * WCW
        D = _oracle(a1, a2, grad, cfg)
        delta = D - C
        slope = float(np.sum(grad * delta))
        if slope >= -gap_tol:
            converged = True
            break
        WdW = W1 @ delta @ W2
        curv = -float(np.sum(delta * WdW))
        t = min(1.0, -slope / (2.0 * curv)) if curv > 0 else 1.0
        C_new = C + t * delta
        WCW_new = W1 @ C_new @ W2
        f_new = const - np.sum(C_new * WCW_new)
        if f_new > f:
            converged = True
            break
        previous = f
        C, WCW, f = C_new, WCW_new, f_new
        history.append(float(f))
        if previous - f <= cfg.convergence_tolerance * max(abs(previous), 1e-300):
            converged = True
            break
    return C, float(f), converged, history


# ---------------------------------------------------------------------------
# duplicate-node quotient


@dataclass
class _Quotient:
    W: np.ndarray
    a: np.ndarray
    groups: list[np.ndarray]  # canonical quotient node -> original node indices


def _quotient(G: MeasureNetwork) -> _Quotient:
    """Merge metrically indistinguishable nodes and put them in a canonical order.

    Nodes with identical weight rows are at distance 0 from each other and
    at equal distance from everything else, so GW distortions are unchanged
    by pooling their mass.  The canonical order (mass, then sorted weight row)
    makes the solver insensitive to node relabeling.
    """
    first: dict[bytes, int] = {}
    owner = []
    for i in range(G.n):
        owner.append(first.setdefault(G.W[i].tobytes(), len(first)))
    owner = np.array(owner)
    reps = np.array([np.flatnonzero(owner == g)[0] for g in range(len(first))])
    groups = [np.flatnonzero(owner == g) for g in range(len(first))]
    Wq = G.W[np.ix_(reps, reps)]
    aq = np.array([G.p[g].sum() for g in groups])
    keys = np.column_stack([aq, np.sort(Wq, axis=1)])
    order = np.lexsort(keys.T[::-1])
    return _Quotient(Wq[np.ix_(order, order)], aq[order], [groups[k] for k in order])


def _split(total_row, masses):
    """Northwest-corner split of one pooled row over member masses."""
    out = np.zeros((len(masses), len(total_row)))
    ra = list(masses)
    rb = total_row.astype(float).tolist()
    i = j = 0
    while i < len(ra) and j < len(rb):
        x = max(min(ra[i], rb[j]), 0.0)
        out[i, j] += x
        ra[i] -= x
        rb[j] -= x
        if j == len(rb) - 1 or (i < len(ra) - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return out


def _expand(Cq, q1: _Quotient, q2: _Quotient, p1, p2):
    n1, n2 = len(p1), len(p2)
    rows = np.zeros((n1, Cq.shape[1]))
    for g, members in enumerate(q1.groups):
        rows[members] = Cq[g] if len(members) == 1 else _split(Cq[g], p1[members])
    C = np.zeros((n1, n2))
    for h, members in enumerate(q2.groups):
        if len(members) == 1:
            C[:, members[0]] = rows[:, h]
        else:
            C[:, members] = _split(rows[:, h], p2[members]).T
    return C


def _reduce(C, q1: _Quotient, q2: _Quotient):
    rows = np.array([C[g].sum(axis=0) for g in q1.groups])
    return np.column_stack([rows[:, h].sum(axis=1) for h in q2.groups])


# ---------------------------------------------------------------------------
# starting couplings


def _w1_1d(x_sorted, cx, y_sorted, cy):
    u = np.union1d(cx, cy)
    u = u[u <= min(cx[-1], cy[-1])]
    du = np.diff(np.concatenate([[0.0], u]))
    mid = u - 0.5 * du
    qx = x_sorted[np.minimum(np.searchsorted(cx, mid), len(x_sorted) - 1)]
    qy = y_sorted[np.minimum(np.searchsorted(cy, mid), len(y_sorted) - 1)]
    return float(np.sum(np.abs(qx - qy) * du))


def _profile_cost(W1, a1, W2, a2):
    """Wasserstein-1 distance between the distance profiles of every node pair."""
    prof1 = []
    for i in range(W1.shape[0]):
        o = np.argsort(W1[i], kind="stable")
        prof1.append((W1[i][o], np.cumsum(a1[o])))
    prof2 = []
    for j in range(W2.shape[0]):
        o = np.argsort(W2[j], kind="stable")
        prof2.append((W2[j][o], np.cumsum(a2[o])))
    cost = np.empty((len(prof1), len(prof2)))
    for i, (xs, cx) in enumerate(prof1):
        for j, (ys, cy) in enumerate(prof2):
            cost[i, j] = _w1_1d(xs, cx, ys, cy)
    return cost


def _starts(q1: _Quotient, q2: _Quotient, cfg: GwConfig):
    starts = [np.outer(q1.a, q2.a)]
    if q1.W.shape[0] > 1 and q2.W.shape[0] > 1:
        starts.append(_exact_transport(q1.a, q2.a, _profile_cost(q1.W, q1.a, q2.W, q2.a)))
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.restarts):
        starts.append(_exact_transport(q1.a, q2.a, rng.random((len(q1.a), len(q2.a)))))
    return starts


# ---------------------------------------------------------------------------
# public solvers


def _check_pair(G1: MeasureNetwork, G2: MeasureNetwork, init):
    if init is not None:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (G1.n, G2.n):
            raise ShapeError(f"init coupling {init.shape} does not match networks ({G1.n}, {G2.n})")
    return init


def solve_coupling(G1: MeasureNetwork, G2: MeasureNetwork, init=None, cfg: GwConfig | None = None) -> CouplingResult:
    """Locally optimal coupling between two measure networks.

    Without ``init`` the solver runs Frank-Wolfe from the product coupling
    and from the distance-profile transport plan (plus ``cfg.restarts``
    random vertices) and keeps the best.  With ``init`` it descends from that
    coupling alone, so the result stays close to it.
    """
    cfg = cfg or GwConfig()
    init = _check_pair(G1, G2, init)
    q1, q2 = _quotient(G1), _quotient(G2)
    starts = [_reduce(init, q1, q2)] if init is not None else _starts(q1, q2, cfg)
    best = None
    for C0 in starts:
        C, f, ok, hist = _frank_wolfe(q1.W, q2.W, q1.a, q2.a, C0, cfg)
        if best is None or f < best[1]:
            best = (C, f, ok, hist)
    C, f, ok, hist = best
    full = _expand(C, q1, q2, G1.p, G2.p)
    if not ok:
        warnings.warn("Frank-Wolfe hit max_outer_iterations", NonConvergenceWarning, stacklevel=2)
    return CouplingResult(full, distortion(full, G1.W, G2.W), ok, hist)


def gw_solve(G1: MeasureNetwork, G2: MeasureNetwork, cfg: GwConfig | None = None) -> CouplingResult:
    """Best coupling over both argument orders; symmetric by construction."""
    forward = solve_coupling(G1, G2, cfg=cfg)
    backward = solve_coupling(G2, G1, cfg=cfg)
    if backward.distortion < forward.distortion:
        return CouplingResult(backward.matrix.T.copy(), backward.distortion, backward.converged, backward.history)
    return forward


def gw_distance(G1: MeasureNetwork, G2: MeasureNetwork, cfg: GwConfig | None = None) -> float:
    return gw_solve(G1, G2, cfg).distortion


def blowup_pair(G1: MeasureNetwork, G2: MeasureNetwork, C: np.ndarray):
    """Blow both networks up along the support of ``C`` so the coupling becomes diagonal.

    Node ``(i, j)`` of the support carries mass ``C[i, j]``; in the first
    network it is a copy of ``i``, in the second a copy of ``j``.
    """
    rows, cols = np.nonzero(C > 0)
    mass = C[rows, cols]
    mass = mass / mass.sum()
    B1 = MeasureNetwork(G1.W[np.ix_(rows, rows)], mass, [(int(G1.labels[i][0]), k) for k, i in enumerate(rows)])
    B2 = MeasureNetwork(G2.W[np.ix_(cols, cols)], mass, [(int(G2.labels[j][0]), k) for k, j in enumerate(cols)])
    return B1, B2


def aligned_distance(W1: np.ndarray, W2: np.ndarray, p: np.ndarray) -> float:
    """GW distance of two networks already blown up and aligned node for node."""
    diff = np.asarray(W1) - np.asarray(W2)
    return float(0.5 * p @ (diff * diff) @ p)


# ---------------------------------------------------------------------------
# Frechet mean


@dataclass
class FrechetMeanResult:
    mean: MeasureNetwork
    couplings: list[CouplingResult]
    matchings: list[np.ndarray]
    history: list[float]
    converged: bool
    residual: float
    iterations: int


def tree_degrees(W: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Node degrees of the tree whose path metric is ``W``.

    ``i`` and ``j`` are adjacent when no third node lies between them.
    """
    n = W.shape[0]
    deg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            via = W[i] + W[:, j]
            between = (via <= W[i, j] * (1 + rtol)) & (W[i] > 0) & (W[:, j] > 0)
            between[[i, j]] = False
            if not between.any():
                deg[i] += 1
                deg[j] += 1
    return deg


def initial_mean(networks: list[MeasureNetwork], n_target: int, seed: int = 0) -> MeasureNetwork:
    """Median-size input padded to ``n_target`` nodes by copying its highest-degree node."""
    order = sorted(range(len(networks)), key=lambda i: (networks[i].n, i))
    base = networks[order[(len(order) - 1) // 2]]
    deg = tree_degrees(base.W)
    top = np.flatnonzero(deg == deg.max())
    hub = int(top[0]) if len(top) == 1 else int(np.random.default_rng(seed).choice(top))
    src = np.concatenate([np.arange(base.n), np.full(n_target - base.n, hub, dtype=np.int64)])
    W = base.W[np.ix_(src, src)]
    return MeasureNetwork(W, np.full(n_target, 1.0 / n_target), [(k, 0) for k in range(n_target)])


def _pmap(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _aligned_loss(W_mean, W_aligned):
    n = W_mean.shape[0]
    diff = W_mean - W_aligned
    return 0.5 * float(np.sum(diff * diff)) / (n * n)


def frechet_mean(networks: list[MeasureNetwork], n_target: int, cfg: GwConfig | None = None) -> FrechetMeanResult:
    """Alternate alignment to the current mean and element-wise averaging.

    Each round couples every input to the mean (warm-started from the
    previous round), keep-max binarizes the coupling into a row matching,
    blows the input up along it and replaces the mean's weights with the
    average of the aligned inputs.  A new matching is adopted only if it
    does not raise that input's aligned loss, which makes the recorded
    functional non-increasing; the loop stops when no matching changes,
    at which point the mean is exactly the average of the aligned inputs.
    """
    cfg = cfg or GwConfig()
    if not networks:
        raise ValueError("frechet_mean needs at least one network")
    largest = max(G.n for G in networks)
    if n_target < largest:
        raise ValueError(f"n_target={n_target} is smaller than the largest input ({largest} nodes)")
    H = initial_mean(networks, n_target, cfg.seed)
    N = len(networks)
    couplings: list[CouplingResult | None] = [None] * N
    matchings: list[np.ndarray | None] = [None] * N
    aligned: list[np.ndarray | None] = [None] * N
    history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_mean_iterations + 1):
        def step(i):
            init = couplings[i].matrix if couplings[i] is not None else None
            res = solve_coupling(H, networks[i], init=init, cfg=cfg)
            net, match = blow_up_and_align(networks[i], res.matrix)
            return res, net.W, match

        results = _pmap(step, range(N), cfg.workers)
        changed = False
        for i, (res, W_new, match) in enumerate(results):
            if matchings[i] is None:
                couplings[i], aligned[i], matchings[i] = res, W_new, match
                changed = True
            elif not np.array_equal(match, matchings[i]):
                if _aligned_loss(H.W, W_new) <= _aligned_loss(H.W, aligned[i]):
                    couplings[i], aligned[i], matchings[i] = res, W_new, match
                    changed = True
            else:
                couplings[i] = res
        history.append(sum(_aligned_loss(H.W, Wa) for Wa in aligned) / N)
        if not changed:
            converged = True
            break
        H = MeasureNetwork(sum(aligned) / N, H.p, H.labels)
    residual = float(np.linalg.norm(H.W - sum(aligned) / N))
    if not converged:
        warnings.warn("Frechet mean hit max_mean_iterations", NonConvergenceWarning, stacklevel=2)
    return FrechetMeanResult(H, couplings, matchings, history, converged, residual, iterations)


def warm_start_chain(networks: list[MeasureNetwork], mean: MeasureNetwork, cfg: GwConfig | None = None) -> list[CouplingResult]:
    """Couple each time step to the mean, seeding step ``i`` with step ``i - 1``'s coupling.

    When consecutive networks differ in size the previous coupling cannot be
    reused and the step is solved cold.
    """
    cfg = cfg or GwConfig()
    out: list[CouplingResult] = []
    for i, G in enumerate(networks):
        init = None
        if i > 0:
            prev = out[-1].matrix
            if prev.shape == (mean.n, G.n) and np.allclose(prev.sum(axis=0), G.p, atol=1e-12):
                init = prev
            else:
                log.info("step %d: previous coupling has shape %s, expected %s; solving cold",
                         i, prev.shape, (mean.n, G.n))
        out.append(solve_coupling(mean, G, init=init, cfg=cfg))
    return out
