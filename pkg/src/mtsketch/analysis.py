"""Sketch errors, GW losses and error-vs-k scans."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ShapeError
from .gw import GwConfig, gw_solve
from .network import to_network


@dataclass
class ErrorReport:
    column_errors: list[float]
    global_error: float
    gw_losses: list[float] | None = None
    global_gw_loss: float | None = None
    gw_converged: list[bool] | None = None
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["column", "sketch_error", "gw_loss", "gw_converged"])
        for i, eps in enumerate(self.column_errors):
            tau = "" if self.gw_losses is None else repr(self.gw_losses[i])
            ok = "" if self.gw_converged is None else int(self.gw_converged[i])
            writer.writerow([i, repr(eps), tau, ok])
        return buf.getvalue()

    def summary(self) -> dict:
        return asdict(self)


def sketch_errors(A: np.ndarray, A_hat: np.ndarray) -> tuple[list[float], float]:
    """Per-column squared residuals and their sum (accumulated left to right)."""
    A = np.asarray(A, dtype=np.float64)
    A_hat = np.asarray(A_hat, dtype=np.float64)
    if A.shape != A_hat.shape:
        raise ShapeError(f"shape mismatch {A.shape} vs {A_hat.shape}")
    diff = A - A_hat
    cols = [float(x) for x in np.einsum("ij,ij->j", diff, diff)]
    total = 0.0
    for x in cols:
        total += x
    return cols, total


def gw_losses(input_trees, sketched_trees, cfg: GwConfig | None = None, workers: int = 1):
    """GW distance between each input tree and its sketched tree.

    Returns ``(losses, total, converged_flags)``.
    """
    if len(input_trees) != len(sketched_trees):
        raise ShapeError(f"{len(input_trees)} input trees vs {len(sketched_trees)} sketched trees")
    cfg = cfg or GwConfig()

    def one(pair):
        T, S = pair
        return gw_solve(to_network(T), to_network(S), cfg)

    pairs = list(zip(input_trees, sketched_trees))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    losses = [r.distortion for r in results]
    total = 0.0
    for x in losses:
        total += x
    return losses, total, [r.converged for r in results]


def suggest_elbow(ks, values) -> int | None:
    """Advisory elbow: the k with the largest discrete second difference."""
    ks = list(ks)
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return None
    second = v[:-2] - 2 * v[1:-1] + v[2:]
    return int(ks[1 + int(np.argmax(second))])
