"""Scalar grids: loading, saving, and the synthetic rotating-Gaussian series."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class ScalarGrid:
    """2D scalar field sampled on a ``height x width`` grid (row-major)."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != self.width * self.height:
            raise ValidationError(
                f"expected {self.width * self.height} values for a {self.width}x{self.height} grid, got {values.size}"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ValidationError(f"non-finite value at cell {int(bad[0])}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.height, self.width)

    def __eq__(self, other):
        if not isinstance(other, ScalarGrid):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(self.values, other.values)


def negate(grid: ScalarGrid) -> ScalarGrid:
    # 0.0 - x keeps zeros as +0.0 so repeated negation round-trips byte-exactly
    return ScalarGrid(grid.width, grid.height, 0.0 - grid.values)


# ---------------------------------------------------------------------------
# file formats

_RAW_HEADER = struct.Struct("<II")


def load_grid(path, format: str | None = None) -> ScalarGrid:
    """Read a grid from CSV or raw-binary.

    CSV carries its dimensions implicitly (one line per grid row).  Raw-binary
    is two little-endian uint32 dimensions (width, height) followed by
    ``width * height`` little-endian float64 values.
    """
    path = Path(path)
    if format is None:
        format = "raw" if path.suffix in (".raw", ".bin") else "csv"
    if format == "csv":
        return _load_csv(path)
    if format in ("raw", "raw-binary"):
        return _load_raw(path)
    raise ValueError(f"unknown grid format {format!r}")


def _load_csv(path: Path) -> ScalarGrid:
    text = path.read_text()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ParseError(f"{path}: empty grid file")
    rows = []
    for lineno, line in enumerate(lines, start=1):
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise ParseError(f"{path}: row {lineno}: {exc}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"{path}: row {lineno} has {len(rows[-1])} columns, expected {len(rows[0])}")
    arr = np.array(rows, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = bad[0]
        raise ValidationError(f"{path}: non-finite value at row {r + 1}, column {c + 1}")
    return ScalarGrid(arr.shape[1], arr.shape[0], arr.ravel())


def _load_raw(path: Path) -> ScalarGrid:
    data = path.read_bytes()
    if len(data) < _RAW_HEADER.size:
        raise ParseError(f"{path}: truncated header at offset 0")
    width, height = _RAW_HEADER.unpack_from(data, 0)
    expected = _RAW_HEADER.size + 8 * width * height
    if len(data) != expected:
        raise ParseError(f"{path}: expected {expected} bytes for {width}x{height} grid, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_RAW_HEADER.size).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValidationError(f"{path}: non-finite value at byte offset {_RAW_HEADER.size + 8 * int(bad[0])}")
    return ScalarGrid(width, height, values)


def save_grid(grid: ScalarGrid, path, format: str | None = None) -> None:
    path = Path(path)
    if format is None:
        format = "raw" if path.suffix in (".raw", ".bin") else "csv"
    if format == "csv":
        rows = grid.as_array()
        path.write_text("\n".join(",".join(repr(float(x)) for x in row) for row in rows) + "\n")
    elif format in ("raw", "raw-binary"):
        path.write_bytes(_RAW_HEADER.pack(grid.width, grid.height) + grid.values.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown grid format {format!r}")


# ---------------------------------------------------------------------------
# rotating Gaussian mixture


@dataclass
class GaussianComponent:
    center: tuple[float, float]
    amplitude: float = 1.0
    covariance: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    drift: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValidationError("covariance must be a symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ValidationError("covariance must be positive definite")


@dataclass
class GaussianMixtureSpec:
    """A mixture of 2D Gaussian bumps under rigid motion.

    At step ``t`` every component center is first moved by ``t * drift``
    (its own drift), then the whole configuration is rotated by
    ``t * rotation`` radians about ``pivot`` and translated by
    ``t * translation``.  Covariances rotate with the configuration.
    The grid samples cell centers of ``extent = (xmin, xmax, ymin, ymax)``.
    """

    components: list[GaussianComponent] = field(default_factory=list)
    timesteps: int = 1
    width: int = 32
    height: int = 32
    extent: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    translation: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    pivot: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.timesteps < 1:
            raise ValidationError("timesteps must be >= 1")
        if self.width < 1 or self.height < 1:
            raise ValidationError("grid dimensions must be positive")
        self.components = [
            c if isinstance(c, GaussianComponent) else GaussianComponent(**c) for c in self.components
        ]

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixtureSpec":
        data = dict(data)
        comps = []
        for c in data.pop("components", []):
            c = dict(c)
            for key in ("center", "drift"):
                if key in c:
                    c[key] = tuple(c[key])
            if "covariance" in c:
                c["covariance"] = tuple(tuple(row) for row in c["covariance"])
            comps.append(GaussianComponent(**c))
        for key in ("extent", "translation", "pivot"):
            if key in data:
                data[key] = tuple(data[key])
        unknown = set(data) - {"timesteps", "width", "height", "extent", "translation", "rotation", "pivot"}
        if unknown:
            raise ValidationError(f"unknown mixture spec keys: {sorted(unknown)}")
        return cls(components=comps, **data)

    @classmethod
    def from_file(cls, path) -> "GaussianMixtureSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "components": [
                {
                    "center": list(c.center),
                    "amplitude": c.amplitude,
                    "covariance": [list(r) for r in c.covariance],
                    "drift": list(c.drift),
                }
                for c in self.components
            ],
            "timesteps": self.timesteps,
            "width": self.width,
            "height": self.height,
            "extent": list(self.extent),
            "translation": list(self.translation),
            "rotation": self.rotation,
            "pivot": list(self.pivot),
        }


def _pose(spec: GaussianMixtureSpec, comp: GaussianComponent, t: int):
    angle = t * spec.rotation
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    pivot = np.asarray(spec.pivot, dtype=float)
    center = np.asarray(comp.center, dtype=float) + t * np.asarray(comp.drift, dtype=float)
    center = pivot + rot @ (center - pivot) + t * np.asarray(spec.translation, dtype=float)
    cov = rot @ np.asarray(comp.covariance, dtype=float) @ rot.T
    return center, cov


def gen_gaussian_mixture(spec: GaussianMixtureSpec, t: int) -> ScalarGrid:
    if not 0 <= t < spec.timesteps:
        raise IndexError(f"timestep {t} outside [0, {spec.timesteps})")
    xmin, xmax, ymin, ymax = spec.extent
    xs = xmin + (np.arange(spec.width) + 0.5) * (xmax - xmin) / spec.width
    ys = ymin + (np.arange(spec.height) + 0.5) * (ymax - ymin) / spec.height
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    out = np.zeros(pts.shape[0])
    for comp in spec.components:
        center, cov = _pose(spec, comp, t)
        diff = pts - center
        prec = np.linalg.inv(cov)
        q = np.einsum("ij,jk,ik->i", diff, prec, diff)
        out += comp.amplitude * np.exp(-0.5 * q)
    return ScalarGrid(spec.width, spec.height, out)


def default_rotating_gaussian() -> GaussianMixtureSpec:
    """Illustrative 12-step series used by the examples and acceptance tests.

    Three bumps rotate slowly about the domain center while the third drifts
    into the second; around the middle of the series the two peaks fuse and
    the merge tree of ``-f`` loses a leaf.
    """
    return GaussianMixtureSpec.from_file(Path(__file__).with_name("data") / "rotating_gaussian.json")
