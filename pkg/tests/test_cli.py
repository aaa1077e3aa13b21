import json
import subprocess
import sys

import numpy as np
import pytest

from mtsketch.cli import EXIT_OK, EXIT_VALIDATION, PipelineConfig, main
from mtsketch.field import ScalarGrid, save_grid
from mtsketch.storage import read_matrix
from treegen import random_merge_tree

BINARIES = ["mean.bin", "A.bin", "B.bin", "Y.bin", "A_hat.bin"]


def _config(tmp_path, name="cfg.json", **overrides):
    data = {"out": str(tmp_path / "out")}
    data.update(overrides)
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def _binaries(out):
    files = [out / b for b in BINARIES] + sorted((out / "couplings").glob("*.bin"))
    return {f.relative_to(out).as_posix(): f.read_bytes() for f in files}


def test_pipeline_manifest(tmp_path):
    assert main(["pipeline", "--config", str(_config(tmp_path))]) == EXIT_OK
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stages"]["extract"]["n_trees"] == 12
    for stage in ("extract", "mean", "vectorize", "sketch", "reconstruct", "errors", "render"):
        assert stage in manifest["stages"]
    assert len(list((out / "sketched").glob("*.json"))) == 12
    assert len(list((out / "figures").glob("*.svg"))) == 24
    rows = (out / "errors.csv").read_text().splitlines()
    assert rows[0].startswith("column,sketch_error") and len(rows) == 13


@pytest.mark.filterwarnings("ignore::mtsketch.sketcher.RankDeficiencyWarning")
def test_k_equals_n_lossless(tmp_path):
    assert main(["pipeline", "--config", str(_config(tmp_path)), "--k", "12"]) == EXIT_OK
    errors = json.loads((tmp_path / "out" / "errors.json").read_text())
    assert errors["global_error"] <= 1e-10


def test_deterministic(tmp_path):
    a = _config(tmp_path, "a.json", out=str(tmp_path / "a"))
    b = _config(tmp_path, "b.json", out=str(tmp_path / "b"))
    assert main(["pipeline", "--config", str(a)]) == EXIT_OK
    assert main(["pipeline", "--config", str(b)]) == EXIT_OK
    assert _binaries(tmp_path / "a") == _binaries(tmp_path / "b")


def test_missing_artifact_exit_code(tmp_path, capsys):
    assert main(["sketch", "--out", str(tmp_path / "empty")]) == EXIT_VALIDATION
    assert "run `mtsketch vectorize` first" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"method": "svd"}')
    assert main(["pipeline", "--config", str(p)]) == EXIT_VALIDATION
    p.write_text("{not json")
    assert main(["pipeline", "--config", str(p)]) == EXIT_VALIDATION
    p.write_text('{"speed": 3}')
    assert main(["pipeline", "--config", str(p)]) == EXIT_VALIDATION
    assert main(["pipeline", "--config", str(_config(tmp_path)), "--k", "13"]) == EXIT_VALIDATION


def test_subcommands_compose_to_pipeline(tmp_path):
    full = _config(tmp_path, "full.json", out=str(tmp_path / "full"))
    step = _config(tmp_path, "step.json", out=str(tmp_path / "step"))
    assert main(["pipeline", "--config", str(full)]) == EXIT_OK
    for stage in ("extract", "mean", "vectorize", "sketch", "reconstruct", "errors", "render"):
        assert main([stage, "--config", str(step)]) == EXIT_OK
    assert _binaries(tmp_path / "full") == _binaries(tmp_path / "step")
    assert (tmp_path / "full" / "errors.csv").read_text() == (tmp_path / "step" / "errors.csv").read_text()


def test_grids_input(tmp_path):
    rng = np.random.default_rng(1)
    d = tmp_path / "grids"
    d.mkdir()
    for i in range(3):
        save_grid(ScalarGrid(6, 5, rng.standard_normal(30)), d / f"g{i}.csv")
    cfg = _config(tmp_path, input={"type": "grids", "path": str(d), "format": "csv"}, k=2, method="lss")
    assert main(["pipeline", "--config", str(cfg)]) == EXIT_OK
    A = read_matrix(tmp_path / "out" / "A.bin")
    assert A.shape[1] == 3


def test_trees_input_and_curve(tmp_path):
    rng = np.random.default_rng(2)
    d = tmp_path / "trees"
    d.mkdir()
    for i in range(4):
        random_merge_tree(rng, 3).save(d / f"t{i}.json")
    cfg = _config(tmp_path, input={"type": "trees", "path": str(d)}, k=2, method="nmf", tree="lsst",
                  k_values=[1, 2, 3, 4])
    assert main(["pipeline", "--config", str(cfg)]) == EXIT_OK
    curve = json.loads((tmp_path / "out" / "curve.json").read_text())
    assert [r[0] for r in curve["rows"]] == [1, 2, 3, 4]
    assert (tmp_path / "out" / "figures" / "curve.svg").exists()


def test_config_digest_ignores_out():
    assert PipelineConfig(out="a").digest() == PipelineConfig(out="b").digest()
    assert PipelineConfig(seed=1).digest() != PipelineConfig(seed=2).digest()


def test_sub_seeds_differ_by_stage():
    cfg = PipelineConfig(seed=7)
    assert cfg.sub_seed("mean") != cfg.sub_seed("sketch")
    assert cfg.sub_seed("mean") == PipelineConfig(seed=7).sub_seed("mean")


def test_console_script_module(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mtsketch.cli", "sketch", "--out", str(tmp_path / "x")],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_VALIDATION


def test_unknown_layout_rejected():
    with pytest.raises(ValueError):
        PipelineConfig(tree="kruskal")
