"""Command-line driver for the sketching pipeline.

Every subcommand reads the same JSON config (plus flag overrides), reads
its predecessors' artifacts from the output directory and writes its own.
``pipeline`` runs all stages in order.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import ErrorReport, gw_losses, sketch_errors, suggest_elbow
from .errors import MissingArtifactError, MTSketchError
from .field import GaussianMixtureSpec, default_rotating_gaussian, load_grid, negate
from .gw import GwConfig, NonConvergenceWarning
from .mtree import MergeTree, extract_merge_tree
from .pipeline import (DataMatrix, align_to_mean, elbow_scan, reconstruct_all, target_size,
                       trees_from_spec, vectorize_trees)
from .reconstruct import basis_trees
from .render import emit_dot, emit_svg, layout_tree
from .sketcher import SketchResult, sketch
from .storage import read_json, read_matrix, write_json, write_matrix

log = logging.getLogger("mtsketch")

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 2, 3
STAGES = ("extract", "mean", "vectorize", "sketch", "reconstruct", "errors", "render")


@dataclass
class PipelineConfig:
    """Resolved configuration.

    ``input`` is ``{"type": "synthetic", "spec": path or null}``,
    ``{"type": "grids", "path": dir, "format": "csv"|"raw"}`` or
    ``{"type": "trees", "path": dir}``.
    """

    input: dict = field(default_factory=lambda: {"type": "synthetic", "spec": None})
    n_factor: float = 2.0
    gw: dict = field(default_factory=dict)
    method: str = "ifs"
    k: int = 2
    k_values: list[int] | None = None
    tree: str = "mst"
    c_alpha: float = 1.0
    c_beta: float = 1.0
    connectivity: int = 4
    layout: str = "root-aligned"
    seed: int = 0
    out: str = "mtsketch-out"

    def __post_init__(self):
        if self.method.lower() not in ("lss", "ifs", "nmf"):
            raise ValueError(f"unknown sketch method {self.method!r}")
        self.method = self.method.lower()
        if self.tree not in ("mst", "lsst"):
            raise ValueError(f"unknown tree method {self.tree!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_factor < 1:
            raise ValueError("n_factor must be >= 1")
        if self.input.get("type") not in ("synthetic", "grids", "trees"):
            raise ValueError(f"unknown input type {self.input.get('type')!r}")
        GwConfig.from_dict(self.gw)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def digest(self) -> str:
        """Hash of everything that affects results (the output location does not)."""
        payload = asdict(self)
        payload.pop("out")
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def sub_seed(self, stage: str) -> int:
        """Per-stage seed from a counter-based split of the global seed."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(STAGES.index(stage),))
        return int(ss.generate_state(1, dtype=np.uint32)[0])

    def gw_config(self, stage: str) -> GwConfig:
        opts = dict(self.gw)
        opts.setdefault("seed", self.sub_seed(stage))
        return GwConfig.from_dict(opts)


class Run:
    """Output directory, manifest bookkeeping and convergence flags for one invocation."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.nonconverged: list[str] = []

    def path(self, *parts) -> Path:
        return self.out.joinpath(*parts)

    def require(self, name: str, stage: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingArtifactError(f"{p} not found; run `mtsketch {stage}` first")
        return p

    def record(self, stage: str, artifacts: list[str], converged: bool = True, **extra) -> None:
        mpath = self.path("manifest.json")
        manifest = read_json(mpath) if mpath.exists() else {}
        manifest.update({
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "kernel_backend": kernels.BACKEND,
            "config": asdict(self.cfg),
            "config_hash": self.cfg.digest(),
            "seed": self.cfg.seed,
            "sub_seeds": {s: self.cfg.sub_seed(s) for s in STAGES},
        })
        manifest.setdefault("stages", {})[stage] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "artifacts": sorted(artifacts),
            "converged": bool(converged),
            **extra,
        }
        write_json(mpath, manifest)
        if not converged:
            self.nonconverged.append(stage)


# ---------------------------------------------------------------------------
# artifact helpers


def _tree_files(run: Run, folder: str, stage: str) -> list[Path]:
    d = run.path(folder)
    files = sorted(d.glob("*.json")) if d.is_dir() else []
    if not files:
        raise MissingArtifactError(f"no trees under {d}; run `mtsketch {stage}` first")
    return files


def load_input_trees(run: Run) -> list[MergeTree]:
    return [MergeTree.load(p) for p in _tree_files(run, "trees", "extract")]


def load_sketch(run: Run) -> SketchResult:
    meta = read_json(run.require("sketch.json", "sketch"))
    B = read_matrix(run.require("B.bin", "sketch"))
    Y = read_matrix(run.require("Y.bin", "sketch"))
    return SketchResult(meta["method"], meta["k"], B, Y, meta["basis_indices"], meta["seed"],
                        meta["history"], meta["converged"])


def load_data(run: Run) -> DataMatrix:
    A = read_matrix(run.require("A.bin", "vectorize"))
    meta = read_json(run.require("alignment.json", "vectorize"))
    return DataMatrix(A, meta["n"], None, [], [np.array(m) for m in meta["matchings"]], meta["roots"])


# ---------------------------------------------------------------------------
# stages


def cmd_extract(run: Run) -> None:
    cfg = run.cfg
    src = cfg.input
    if src["type"] == "trees":
        files = sorted(Path(src["path"]).glob("*.json"))
        trees = [MergeTree.load(p) for p in files]
        origin = [str(p) for p in files]
    elif src["type"] == "grids":
        fmt = src.get("format", "csv")
        files = sorted(Path(src["path"]).glob(f"*.{fmt}"))
        trees = [extract_merge_tree(negate(load_grid(p, fmt)), cfg.connectivity) for p in files]
        origin = [str(p) for p in files]
    else:
        spec = GaussianMixtureSpec.from_file(src["spec"]) if src.get("spec") else default_rotating_gaussian()
        trees = trees_from_spec(spec, cfg.connectivity)
        origin = [f"synthetic:t={t}" for t in range(spec.timesteps)]
    if not trees:
        raise MissingArtifactError(f"no input found for {src}")
    if cfg.k > len(trees):
        raise ValueError(f"k={cfg.k} exceeds the number of input trees ({len(trees)})")
    d = run.path("trees")
    d.mkdir(exist_ok=True)
    for stale in d.glob("*.json"):
        stale.unlink()
    names = []
    for i, (T, o) in enumerate(zip(trees, origin)):
        name = f"trees/T{i:03d}.json"
        T.save(run.path(name), provenance={"index": i, "source": o})
        names.append(name)
    run.record("extract", names, n_trees=len(trees), tree_sizes=[len(T) for T in trees])


def cmd_mean(run: Run) -> None:
    cfg = run.cfg
    trees = load_input_trees(run)
    n = target_size(trees, cfg.n_factor)
    fm, chain = align_to_mean(trees, n, cfg.gw_config("mean"))
    write_matrix(run.path("mean.bin"), fm.mean.W)
    d = run.path("couplings")
    d.mkdir(exist_ok=True)
    names = ["mean.bin", "mean.json"]
    for i, res in enumerate(chain):
        write_matrix(d / f"C{i:03d}.bin", res.matrix)
        names.append(f"couplings/C{i:03d}.bin")
    converged = fm.converged and all(c.converged for c in chain)
    write_json(run.path("mean.json"), {
        "n": n,
        "p": fm.mean.p.tolist(),
        "history": fm.history,
        "iterations": fm.iterations,
        "residual": fm.residual,
        "converged": fm.converged,
        "couplings": [{"distortion": c.distortion, "converged": c.converged} for c in chain],
    })
    run.record("mean", names, converged, n_target=n)


def cmd_vectorize(run: Run) -> None:
    trees = load_input_trees(run)
    meta = read_json(run.require("mean.json", "mean"))
    couplings = [read_matrix(run.require(f"couplings/C{i:03d}.bin", "mean")) for i in range(len(trees))]
    A, matchings, roots = vectorize_trees(trees, couplings)
    write_matrix(run.path("A.bin"), A)
    write_json(run.path("alignment.json"), {
        "n": meta["n"],
        "roots": roots,
        "matchings": [m.tolist() for m in matchings],
    })
    run.record("vectorize", ["A.bin", "alignment.json"], shape=list(A.shape))


def cmd_sketch(run: Run) -> None:
    cfg = run.cfg
    A = read_matrix(run.require("A.bin", "vectorize"))
    if cfg.k > A.shape[1]:
        raise ValueError(f"k={cfg.k} exceeds the number of columns ({A.shape[1]})")
    seed = cfg.sub_seed("sketch")
    sk = sketch(A, cfg.k, cfg.method, seed)
    write_matrix(run.path("B.bin"), sk.B)
    write_matrix(run.path("Y.bin"), sk.Y)
    write_matrix(run.path("A_hat.bin"), sk.A_hat)
    write_json(run.path("sketch.json"), {
        "method": sk.method,
        "k": sk.k,
        "basis_indices": sk.basis_indices,
        "seed": seed,
        "history": sk.history,
        "converged": sk.converged,
    })
    run.record("sketch", ["B.bin", "Y.bin", "A_hat.bin", "sketch.json"], sk.converged)


def cmd_reconstruct(run: Run) -> None:
    cfg = run.cfg
    data = load_data(run)
    trees = load_input_trees(run)
    sk = load_sketch(run)
    A_hat = read_matrix(run.require("A_hat.bin", "sketch"))
    sketched = reconstruct_all(A_hat, data.n, data.roots, cfg.tree, cfg.c_alpha, cfg.c_beta)
    names = []
    for sub in ("sketched", "basis"):
        run.path(sub).mkdir(exist_ok=True)
        for stale in run.path(sub).glob("*.json"):
            stale.unlink()
    prov = {"method": sk.method, "k": sk.k, "seed": sk.seed, "tree": cfg.tree}
    for i, S in enumerate(sketched):
        name = f"sketched/S{i:03d}.json"
        S.to_merge_tree(S.root).save(run.path(name), provenance={**prov, "column": i})
        names.append(name)
    basis_roots = [data.roots[i] for i in sk.basis_indices] if sk.basis_indices else None
    for j, bt in enumerate(basis_trees(sk, trees, data.n, cfg.tree, cfg.c_alpha, cfg.c_beta, basis_roots)):
        name = f"basis/B{j:03d}.json"
        tree = bt.tree if isinstance(bt.tree, MergeTree) else bt.tree.to_merge_tree(bt.tree.root)
        tree.save(run.path(name), provenance={**prov, "column": bt.column, "scale": bt.scale})
        names.append(name)
    run.record("reconstruct", names)


def cmd_errors(run: Run) -> None:
    cfg = run.cfg
    data = load_data(run)
    trees = load_input_trees(run)
    sk = load_sketch(run)
    sketched = [MergeTree.load(p) for p in _tree_files(run, "sketched", "reconstruct")]
    A_hat = read_matrix(run.require("A_hat.bin", "sketch"))
    cols, total = sketch_errors(data.A, A_hat)
    gcfg = cfg.gw_config("errors")
    taus, tau, flags = gw_losses(trees, sketched, gcfg, gcfg.workers)
    report = ErrorReport(cols, total, taus, tau, flags,
                         {"method": sk.method, "k": sk.k, "seed": sk.seed, "tree": cfg.tree})
    run.path("errors.csv").write_text(report.to_csv())
    write_json(run.path("errors.json"), report.summary())
    names = ["errors.csv", "errors.json"]
    if cfg.k_values:
        rows = elbow_scan(trees, cfg.k_values, cfg.method, gcfg, seed=sk.seed, tree_method=cfg.tree,
                          c_alpha=cfg.c_alpha, c_beta=cfg.c_beta, data=data)
        lines = ["k,sketch_error,gw_loss"] + [f"{k},{e!r},{t!r}" for k, e, t in rows]
        run.path("curve.csv").write_text("\n".join(lines) + "\n")
        write_json(run.path("curve.json"), {
            "rows": [list(r) for r in rows],
            "suggested_elbow": suggest_elbow([r[0] for r in rows], [r[1] for r in rows]),
            "advisory": True,
        })
        names += ["curve.csv", "curve.json"]
    run.record("errors", names, all(flags), global_sketch_error=total, global_gw_loss=tau)


def cmd_render(run: Run) -> None:
    cfg = run.cfg
    trees = load_input_trees(run)
    sketched = [MergeTree.load(p) for p in _tree_files(run, "sketched", "reconstruct")]
    d = run.path("figures")
    d.mkdir(exist_ok=True)
    names = []
    for prefix, group in (("input", trees), ("sketched", sketched)):
        for i, T in enumerate(group):
            layout = layout_tree(T, cfg.layout, T.root if cfg.layout == "root-aligned" else None)
            (d / f"{prefix}_{i:03d}.svg").write_text(emit_svg(layout))
            (d / f"{prefix}_{i:03d}.dot").write_text(emit_dot(T))
            names += [f"figures/{prefix}_{i:03d}.svg", f"figures/{prefix}_{i:03d}.dot"]
    if run.path("curve.json").exists():
        (d / "curve.svg").write_text(emit_svg(read_json(run.path("curve.json"))["rows"]))
        names.append("figures/curve.svg")
    run.record("render", names)


COMMANDS = {
    "extract": cmd_extract,
    "mean": cmd_mean,
    "vectorize": cmd_vectorize,
    "sketch": cmd_sketch,
    "reconstruct": cmd_reconstruct,
    "errors": cmd_errors,
    "render": cmd_render,
}


def cmd_pipeline(run: Run) -> None:
    for stage in STAGES:
        COMMANDS[stage](run)


COMMANDS["pipeline"] = cmd_pipeline


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtsketch", description="Sketch a collection of merge trees.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON pipeline config")
        p.add_argument("--seed", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--method", choices=["lss", "ifs", "nmf"])
        p.add_argument("--tree", choices=["mst", "lsst"])
        p.add_argument("--out", type=Path)
    return parser


def resolve_config(args) -> PipelineConfig:
    data = json.loads(args.config.read_text()) if args.config else {}
    for key in ("seed", "k", "method", "tree", "out"):
        value = getattr(args, key)
        if value is not None:
            data[key] = str(value) if key == "out" else value
    unknown = set(data) - set(PipelineConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run = Run(resolve_config(args))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            COMMANDS[args.command](run)
    except (MTSketchError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"mtsketch {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if run.nonconverged:
        print(f"mtsketch {args.command}: solver did not converge in {', '.join(run.nonconverged)}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
