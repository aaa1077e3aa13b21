"""In-memory pipeline stages: trees -> data matrix -> sketch -> trees -> errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import ErrorReport, gw_losses, sketch_errors
from .field import GaussianMixtureSpec, gen_gaussian_mixture, negate
from .gw import CouplingResult, FrechetMeanResult, GwConfig, frechet_mean, warm_start_chain
from .mtree import MergeTree, WeightedTree, extract_merge_tree
from .network import blow_up_and_align, to_network, vectorize
from .reconstruct import reconstruct_sketched_tree
from .sketcher import sketch


def trees_from_spec(spec: GaussianMixtureSpec, connectivity=4) -> list[MergeTree]:
    """Merge trees of ``-f`` for every time step of a Gaussian mixture series."""
    return [extract_merge_tree(negate(gen_gaussian_mixture(spec, t)), connectivity) for t in range(spec.timesteps)]


def target_size(trees, factor: float) -> int:
    return max(1, math.ceil(factor * max(len(T) for T in trees)))


@dataclass
class DataMatrix:
    A: np.ndarray
    n: int
    mean: FrechetMeanResult | None
    couplings: list[CouplingResult]
    matchings: list[np.ndarray]
    roots: list[int]

    @property
    def converged(self) -> bool:
        return self.mean.converged and all(c.converged for c in self.couplings)


def align_to_mean(trees, n_target: int, cfg: GwConfig | None = None):
    """Frechet mean of the trees' networks plus the warm-started coupling of each tree to it."""
    cfg = cfg or GwConfig()
    nets = [to_network(T) for T in trees]
    fm = frechet_mean(nets, n_target, cfg)
    return fm, warm_start_chain(nets, fm.mean, cfg)


def vectorize_trees(trees, couplings):
    """Blow up and align every tree along its coupling; returns ``(A, matchings, roots)``.

    ``roots[i]`` is the first reference row matched to tree ``i``'s root.
    """
    columns, matchings, roots = [], [], []
    for T, C in zip(trees, couplings):
        aligned, match = blow_up_and_align(to_network(T), C)
        columns.append(vectorize(aligned.W))
        matchings.append(match)
        root_index = T.ids.index(T.root)
        roots.append(int(np.flatnonzero(match == root_index)[0]))
    return np.column_stack(columns), matchings, roots


def build_data_matrix(trees, n_target: int, cfg: GwConfig | None = None) -> DataMatrix:
    """Align every tree to a Frechet mean of size ``n_target`` and stack the vectorized blowups."""
    fm, chain = align_to_mean(trees, n_target, cfg)
    A, matchings, roots = vectorize_trees(trees, [c.matrix for c in chain])
    return DataMatrix(A, n_target, fm, chain, matchings, roots)


def reconstruct_all(A_hat: np.ndarray, n: int, roots, method="mst", c_alpha=1.0, c_beta=1.0) -> list[WeightedTree]:
    return [
        reconstruct_sketched_tree(A_hat[:, i], n, method, c_alpha, c_beta, roots[i])
        for i in range(A_hat.shape[1])
    ]


def run_k(data: DataMatrix, trees, k: int, method: str, seed: int = 0, tree_method="mst",
          c_alpha=1.0, c_beta=1.0, cfg: GwConfig | None = None, with_gw=True):
    """Sketch at one ``k`` and report its errors.  Returns ``(sketch, sketched trees, report)``."""
    sk = sketch(data.A, k, method, seed)
    A_hat = sk.A_hat
    cols, total = sketch_errors(data.A, A_hat)
    sketched = reconstruct_all(A_hat, data.n, data.roots, tree_method, c_alpha, c_beta)
    report = ErrorReport(cols, total, metadata={"method": method.upper(), "k": k, "seed": seed, "tree": tree_method})
    if with_gw:
        taus, tau, flags = gw_losses(trees, sketched, cfg)
        report.gw_losses, report.global_gw_loss, report.gw_converged = taus, tau, flags
    return sk, sketched, report


def elbow_scan(trees, k_values, method: str, cfg: GwConfig | None = None, n_factor: float = 2.0,
               seed: int = 0, tree_method="mst", c_alpha=1.0, c_beta=1.0, with_gw=True,
               data: DataMatrix | None = None):
    """Error curve over ``k`` with one shared Frechet mean and data matrix.

    Returns a list of ``(k, global sketch error, global GW loss)`` rows.
    """
    ks = list(k_values)
    if ks != sorted(ks):
        raise ValueError("k_values must be sorted ascending")
    if ks and ks[-1] > len(trees):
        raise ValueError(f"k={ks[-1]} exceeds the number of trees ({len(trees)})")
    if data is None:
        data = build_data_matrix(trees, target_size(trees, n_factor), cfg)
    rows = []
    for k in ks:
        _, _, report = run_k(data, trees, k, method, seed, tree_method, c_alpha, c_beta, cfg, with_gw)
        rows.append((k, report.global_error, report.global_gw_loss))
    return rows
