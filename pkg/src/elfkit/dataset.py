"""Supervised sample extraction from labelled squares.

Every label square is tiled into ``sw`` x ``sw`` windows at a stride of
``sw/2``; each window is cut from all layers (resampled onto a common grid)
and inherits the square's label.

On-disk layout of a sample directory::

    manifest.txt          key = value lines (see ``write_samples``)
    <split>.f32           little-endian float32, shape (n, rows, cols, layers)
    <split>.labels.u8     one uint8 label per sample
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .config import read_keyvalue
from .derive import GridSpec, resample_to
from .geometry import GeoPolygon, polygon_limits
from .raster import GridRaster

log = logging.getLogger(__name__)

LAYER_NAMES = ("R", "G", "B", "NIR", "NDVI", "DSM", "SLOPE", "ROUGHNESS")
LABEL_SIDES = (32.0, 64.0, 128.0, 256.0)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class LabelPolygon:
    polygon: GeoPolygon
    label: int
    side: float

    @classmethod
    def from_polygon(cls, polygon: GeoPolygon, label: int) -> "LabelPolygon":
        if label not in (0, 1):
            raise DatasetError(f"label must be 0 or 1, got {label!r}")
        y0, y1, x0, x1 = polygon_limits(polygon)
        w, h = x1 - x0, y1 - y0
        if abs(w - h) > 1e-6 or abs(polygon.area - w * h) > 1e-6 * max(1.0, w * h):
            raise DatasetError("label polygon is not an axis-aligned square")
        return cls(polygon, int(label), w)

    @classmethod
    def square(cls, min_x: float, min_y: float, side: float, label: int) -> "LabelPolygon":
        poly = GeoPolygon([(min_x, min_y), (min_x + side, min_y), (min_x + side, min_y + side),
                           (min_x, min_y + side)])
        return cls.from_polygon(poly, label)


@dataclass(eq=False)
class SampleSet:
    layers: tuple[str, ...]
    data: np.ndarray  # float32 (n, rows, cols, layers)
    labels: np.ndarray  # uint8 (n,)
    split: str = "all"
    norm: dict = field(default_factory=dict)  # layer -> (min, max)
    seed: int | None = None
    skipped: int = 0  # windows dropped during extraction

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.data.ndim != 4 or self.data.shape[0] != len(self.labels):
            raise DatasetError("data must be (n, rows, cols, layers) with one label per sample")
        if self.data.shape[3] != len(self.layers):
            raise DatasetError("layer count does not match the data")

    def __len__(self):
        return len(self.labels)

    def class_counts(self) -> dict[int, int]:
        return {0: int(np.sum(self.labels == 0)), 1: int(np.sum(self.labels == 1))}

    def subset(self, idx, split: str | None = None) -> "SampleSet":
        idx = np.asarray(idx, dtype=int)
        return replace(self, data=self.data[idx], labels=self.labels[idx],
                       split=self.split if split is None else split, norm=dict(self.norm))


def _window_counts(side: float, sw: float, stride: float) -> int:
    if side + 1e-9 < sw:
        return 0
    return int(math.floor((side - sw) / stride + 1e-9)) + 1


def extract_samples(labels, layers: dict[str, GridRaster], sw: float,
                    stride: float | None = None, resolution: float | None = None) -> SampleSet:
    """Cut labelled windows from co-registered layers.

    Layers coarser than ``resolution`` (default: the finest layer) are
    bilinearly resampled onto the finest layer's grid first. Windows that
    leave the raster or touch nodata are skipped and counted in the log.
    """
    if not layers:
        raise DatasetError("no layers given")
    stride = sw / 2 if stride is None else stride
    names = tuple(layers)
    finest = min(layers.values(), key=lambda r: r.res_x)
    res = finest.res_x if resolution is None else resolution
    if res != finest.res_x:
        spec = GridSpec.covering(*finest.bounds, res)
    else:
        spec = GridSpec.of(finest)
    grids = []
    for name in names:
        r = layers[name]
        if GridSpec.of(r) != spec:
            r = resample_to(r, spec)
        grids.append(r)
    ref = grids[0]
    px = sw / res
    npx = int(round(px))
    if abs(px - npx) > 1e-9:
        raise DatasetError(f"search window {sw} m is not a whole number of {res} m pixels")

    cubes, out_labels = [], []
    skipped = 0
    for lp in labels:
        y0, _, x0, _ = polygon_limits(lp.polygon)
        n = _window_counts(lp.side, sw, stride)
        for i in range(n):
            for j in range(n):
                wx, wy = x0 + j * stride, y0 + i * stride
                col = int(round((wx - ref.origin_x) / res))
                row = int(round((ref.origin_y - (wy + sw)) / res))
                if col < 0 or row < 0 or col + npx > ref.width or row + npx > ref.height:
                    skipped += 1
                    continue
                cube = np.stack([g.values[row:row + npx, col:col + npx] for g in grids], axis=-1)
                if any(np.any(cube[..., k] == g.nodata) for k, g in enumerate(grids)):
                    skipped += 1
                    continue
                cubes.append(cube)
                out_labels.append(lp.label)
    if skipped:
        log.info("skipped %d windows outside the available raster data", skipped)
    data = (np.stack(cubes) if cubes else np.empty((0, npx, npx, len(names))))
    return SampleSet(names, data, np.array(out_labels, dtype=np.uint8), skipped=skipped)


@dataclass
class VerifyReport:
    flagged: list[int]
    max_slope: np.ndarray
    samples: SampleSet


def verify_landable(samples: SampleSet, slope_layer: str = "SLOPE",
                    max_slope_pct: float = 10.0, action: str = "flag") -> VerifyReport:
    """Flag landable samples steeper than ``max_slope_pct`` anywhere.

    ``action`` is ``"flag"`` (keep as is), ``"relabel"`` (set label 0) or
    ``"drop"`` (remove the samples).
    """
    if slope_layer not in samples.layers:
        raise DatasetError(f"sample set has no {slope_layer!r} layer")
    k = samples.layers.index(slope_layer)
    steepest = samples.data[..., k].reshape(len(samples), -1).max(axis=1) if len(samples) \
        else np.empty(0)
    bad = np.flatnonzero((samples.labels == 1) & (steepest > max_slope_pct))
    if action == "flag":
        out = samples
    elif action == "relabel":
        labels = samples.labels.copy()
        labels[bad] = 0
        out = replace(samples, labels=labels)
    elif action == "drop":
        keep = np.setdiff1d(np.arange(len(samples)), bad)
        out = samples.subset(keep)
    else:
        raise ValueError(f"unknown action {action!r}")
    return VerifyReport([int(i) for i in bad], steepest, out)


def balance_split(samples: SampleSet, train_fraction: float = 0.8, seed: int = 0
                  ) -> tuple[SampleSet, SampleSet]:
    """Downsample to equal class counts, then split each class by ``train_fraction``."""
    if not 0 <= train_fraction <= 1:
        raise ValueError("train_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    by_class = [np.flatnonzero(samples.labels == c) for c in (0, 1)]
    if any(len(ix) == 0 for ix in by_class):
        raise DatasetError("both classes need at least one sample")
    n = min(len(ix) for ix in by_class)
    n_train = int(round(train_fraction * n))
    train, test = [], []
    for ix in by_class:
        pick = rng.permutation(ix)[:n]
        train.append(pick[:n_train])
        test.append(pick[n_train:])
    train_idx = rng.permutation(np.concatenate(train))
    test_idx = rng.permutation(np.concatenate(test))
    tr = samples.subset(train_idx, "train")
    te = samples.subset(test_idx, "test")
    tr.seed = te.seed = seed
    return tr, te


def compute_normalization(sets) -> dict[str, tuple[float, float]]:
    """Dataset-wide min/max of every layer over one or more sample sets."""
    sets = list(sets)
    norm = {}
    for k, name in enumerate(sets[0].layers):
        vals = [s.data[..., k] for s in sets if len(s)]
        lo = min(float(v.min()) for v in vals)
        hi = max(float(v.max()) for v in vals)
        norm[name] = (lo, hi)
    return norm


def normalize(samples: SampleSet, norm: dict) -> np.ndarray:
    """Scale each layer to [0, 1] with the stored min/max (float64 result)."""
    out = samples.data.astype(np.float64)
    for k, name in enumerate(samples.layers):
        lo, hi = norm[name]
        span = hi - lo if hi > lo else 1.0
        out[..., k] = (out[..., k] - lo) / span
    return out


def denormalize(values: np.ndarray, layers, norm: dict) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    for k, name in enumerate(layers):
        lo, hi = norm[name]
        span = hi - lo if hi > lo else 1.0
        out[..., k] = out[..., k] * span + lo
    return out


def write_samples(directory, sets, seed: int | None = None) -> None:
    """Write one blob per split plus ``manifest.txt``.

    Manifest keys: ``layers``, ``shape.<split>`` (n,rows,cols,layers),
    ``count.<split>.<class>``, ``norm.<layer>`` (min,max as exact floats),
    ``seed`` and ``splits``.
    """
    os.makedirs(directory, exist_ok=True)
    sets = list(sets)
    norm = {}
    for s in sets:
        norm.update(s.norm)
    lines = [f"layers = {','.join(sets[0].layers)}",
             f"splits = {','.join(s.split for s in sets)}"]
    if seed is None:
        seed = next((s.seed for s in sets if s.seed is not None), None)
    if seed is not None:
        lines.append(f"seed = {seed}")
    for s in sets:
        s.data.astype("<f4").tofile(os.path.join(directory, f"{s.split}.f32"))
        s.labels.astype(np.uint8).tofile(os.path.join(directory, f"{s.split}.labels.u8"))
        lines.append(f"shape.{s.split} = {','.join(str(d) for d in s.data.shape)}")
        for c, n in s.class_counts().items():
            lines.append(f"count.{s.split}.{c} = {n}")
    for name, (lo, hi) in norm.items():
        lines.append(f"norm.{name} = {lo!r},{hi!r}")
    with open(os.path.join(directory, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_samples(directory) -> dict[str, SampleSet]:
    man = read_keyvalue(os.path.join(directory, "manifest.txt"))
    layers = tuple(man["layers"].split(","))
    seed = int(man["seed"]) if "seed" in man else None
    norm = {}
    for key, val in man.items():
        if key.startswith("norm."):
            lo, hi = val.split(",")
            norm[key[5:]] = (float(lo), float(hi))
    out = {}
    for split in man["splits"].split(","):
        shape = tuple(int(d) for d in man[f"shape.{split}"].split(","))
        data = np.fromfile(os.path.join(directory, f"{split}.f32"), dtype="<f4").reshape(shape)
        labels = np.fromfile(os.path.join(directory, f"{split}.labels.u8"), dtype=np.uint8)
        out[split] = SampleSet(layers, data, labels, split, dict(norm), seed)
    return out


def read_label_polygons(path) -> list[LabelPolygon]:
    """Label squares from GeoJSON features carrying a ``label`` property."""
    from .geoio import read_features

    out = []
    for poly, props in read_features(path):
        if "label" not in props:
            raise DatasetError(f"{path}: feature without a 'label' property")
        out.append(LabelPolygon.from_polygon(poly, int(props["label"])))
    return out
