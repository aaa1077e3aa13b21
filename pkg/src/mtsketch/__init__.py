"""Sketching collections of merge trees through Gromov-Wasserstein alignment."""

__version__ = "0.1.0"

from .field import GaussianMixtureSpec, ScalarGrid, default_rotating_gaussian, gen_gaussian_mixture, load_grid, negate
from .gw import GwConfig, frechet_mean, gw_distance, gw_solve, solve_coupling, warm_start_chain
from .mtree import MergeTree, WeightedTree, extract_merge_tree, simplify
from .network import MeasureNetwork, blow_up_and_align, to_network, vectorize, devectorize
from .reconstruct import lsst, mst, reconstruct_sketched_tree
from .sketcher import ifs, lss, nmf, sketch

__all__ = [
    "GaussianMixtureSpec", "ScalarGrid", "default_rotating_gaussian", "gen_gaussian_mixture", "load_grid", "negate",
    "GwConfig", "frechet_mean", "gw_distance", "gw_solve", "solve_coupling", "warm_start_chain",
    "MergeTree", "WeightedTree", "extract_merge_tree", "simplify",
    "MeasureNetwork", "blow_up_and_align", "to_network", "vectorize", "devectorize",
    "lsst", "mst", "reconstruct_sketched_tree",
    "ifs", "lss", "nmf", "sketch",
]
