"""Patch-based landability segmentation with a coarse-to-fine ensemble.

Each stage classifies square search windows (patches) of side ``sw`` laid
out at a stride (``sw/2`` by default). Predictions are accumulated on a
common lattice of base cells whose size is the smallest stride of all
stages. After the first stage, a later stage is run only on cells whose
mean confidence so far is below the threshold or whose confidence-weighted
vote is currently landable; all other cells keep their earlier result.

Grid arrays in this module are indexed ``[row, col]`` with rows increasing
towards +y (row 0 at the southern edge), unlike north-up rasters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy import ndimage

from .geometry import GeoPolygon, polygon_limits
from .raster import GridRaster

log = logging.getLogger(__name__)

UNLANDABLE, LANDABLE = 0, 1
DEFAULT_THRESHOLD = 0.99
DEFAULT_SLOPE_THRESHOLD = 10.0  # percent
PREDICTION_HEADER = ("index", "min_x", "min_y", "sw", "label", "p_max")

_EPS = 1e-9


class SegmentationError(ValueError):
    pass


class MissingPredictionError(SegmentationError):
    def __init__(self, index: int, source: str = ""):
        self.index = index
        where = f" in {source}" if source else ""
        super().__init__(f"no prediction for patch {index}{where}")


def _bbox(area) -> tuple[float, float, float, float]:
    if isinstance(area, GeoPolygon):
        y0, y1, x0, x1 = polygon_limits(area)
        return x0, y0, x1, y1
    if isinstance(area, GridRaster):
        return area.bounds
    x0, y0, x1, y1 = (float(v) for v in area)
    return x0, y0, x1, y1


@dataclass(frozen=True)
class Patch:
    index: int
    row: int
    col: int
    min_x: float
    min_y: float
    sw: float


@dataclass(frozen=True)
class PatchGridSpec:
    """Search-window layout over the bounding box of an area."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float
    sw: float
    stride: float

    @classmethod
    def over(cls, area, sw: float, stride: float | None = None) -> "PatchGridSpec":
        """``area`` may be a GeoPolygon, a GridRaster or a (min_x, min_y, max_x, max_y) box."""
        if sw <= 0:
            raise SegmentationError("search window must be positive")
        stride = sw / 2 if stride is None else stride
        if stride <= 0:
            raise SegmentationError("stride must be positive")
        return cls(*_bbox(area), float(sw), float(stride))

    def _count(self, extent: float) -> int:
        if extent + _EPS < self.sw:
            return 0
        return int(math.floor((extent - self.sw) / self.stride + _EPS)) + 1

    @property
    def nx(self) -> int:
        return self._count(self.max_x - self.min_x)

    @property
    def ny(self) -> int:
        return self._count(self.max_y - self.min_y)

    def patch(self, row: int, col: int) -> Patch:
        return Patch(row * self.nx + col, row, col, self.min_x + col * self.stride,
                     self.min_y + row * self.stride, self.sw)


def patch_grid(spec: PatchGridSpec) -> list[Patch]:
    """All whole windows, row by row from the south-west corner."""
    return [spec.patch(r, c) for r in range(spec.ny) for c in range(spec.nx)]


def confidence(p_max):
    """Map the winning class probability in [0.5, 1] to a confidence in [0, 1]."""
    p = np.asarray(p_max, dtype=float)
    if np.any((p < 0.5) | (p > 1.0)) or np.any(np.isnan(p)):
        raise SegmentationError("class probability must lie in [0.5, 1]")
    out = (p - 0.5) / 0.5
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class PredictionGrid:
    """Per-cell labels and confidences on a regular lattice.

    For a single stage the cells are the patch positions (cell size =
    stride); after refinement they are the base cells of the cascade.
    ``stage`` records the last stage that contributed to each cell
    (0 = never classified).
    """

    origin_x: float
    origin_y: float
    cell: float
    labels: np.ndarray
    confidence: np.ndarray
    stage: np.ndarray
    p_max: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def cell_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        x0 = self.origin_x + col * self.cell
        y0 = self.origin_y + row * self.cell
        return x0, y0, x0 + self.cell, y0 + self.cell

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.shape
        return (self.origin_x + (np.arange(nx) + 0.5) * self.cell,
                self.origin_y + (np.arange(ny) + 0.5) * self.cell)

    def landable_area(self) -> float:
        return float(np.count_nonzero(self.labels == LANDABLE)) * self.cell ** 2


class Classifier(Protocol):
    def predict(self, patches: Sequence[Patch]) -> tuple[np.ndarray, np.ndarray]:
        """Labels (0/1) and winning-class probabilities in [0.5, 1]."""


class SlopeOracle:
    """Rule-based stand-in for a trained model: a patch is landable when its
    steepest slope does not exceed ``threshold`` percent.

    Confidence grows with the distance from the threshold,
    ``|s - t| / max(s, t)``: a flat patch scores 1, a patch right at the
    threshold 0. Nodata slope cells are ignored; a patch without any valid
    cell is unlandable with full confidence.
    """

    kind = "builtin-slope-oracle"

    def __init__(self, slope_pct: GridRaster, threshold: float = DEFAULT_SLOPE_THRESHOLD):
        if threshold <= 0:
            raise SegmentationError("slope threshold must be positive")
        self.slope = slope_pct
        self.threshold = float(threshold)

    def max_slope(self, patch: Patch) -> float:
        r = self.slope
        c0 = max(0, math.ceil((patch.min_x - r.origin_x) / r.res_x - 0.5))
        c1 = min(r.width, math.ceil((patch.min_x + patch.sw - r.origin_x) / r.res_x - 0.5))
        r0 = max(0, math.floor((r.origin_y - patch.min_y - patch.sw) / r.res_y - 0.5) + 1)
        r1 = min(r.height, math.floor((r.origin_y - patch.min_y) / r.res_y - 0.5) + 1)
        if c1 <= c0 or r1 <= r0:
            return math.nan
        block = r.values[r0:r1, c0:c1]
        block = block[block != r.nodata]
        return float(block.max()) if block.size else math.nan

    def predict(self, patches):
        labels = np.zeros(len(patches), dtype=np.int8)
        p = np.ones(len(patches))
        t = self.threshold
        for k, patch in enumerate(patches):
            s = self.max_slope(patch)
            if math.isnan(s):
                continue
            if s <= t:
                labels[k] = LANDABLE
                conf = (t - s) / t
            else:
                conf = (s - t) / s
            p[k] = 0.5 + 0.5 * conf
        return labels, p


class FilePredictions:
    """Predictions produced elsewhere and exchanged as a TSV file.

    ``path`` may contain ``{sw}`` which is filled with the integer window
    size of the requested patches.
    """

    kind = "external-file"

    def __init__(self, path):
        self.path = str(path)
        self._cache: dict[str, dict] = {}

    def _table(self, sw: float) -> tuple[str, dict]:
        path = self.path.format(sw=int(sw)) if "{sw}" in self.path else self.path
        if path not in self._cache:
            self._cache[path] = read_predictions(path)
        return path, self._cache[path]

    def predict(self, patches):
        labels = np.zeros(len(patches), dtype=np.int8)
        p = np.ones(len(patches))
        for k, patch in enumerate(patches):
            path, table = self._table(patch.sw)
            rec = table.get(patch.index)
            if rec is None:
                raise MissingPredictionError(patch.index, path)
            if (rec["min_x"], rec["min_y"], rec["sw"]) != (patch.min_x, patch.min_y, patch.sw):
                raise SegmentationError(
                    f"{path}: patch {patch.index} footprint does not match the grid")
            labels[k] = rec["label"]
            p[k] = rec["p_max"]
        return labels, p


def write_predictions(path, patches: Sequence[Patch], labels, p_max) -> None:
    """Exchange file: one tab-separated record per patch, exact float text."""
    with open(path, "w") as fh:
        fh.write("\t".join(PREDICTION_HEADER) + "\n")
        for patch, lab, p in zip(patches, labels, p_max):
            fh.write(f"{patch.index}\t{patch.min_x!r}\t{patch.min_y!r}\t{patch.sw!r}"
                     f"\t{int(lab)}\t{float(p)!r}\n")


def read_predictions(path) -> dict[int, dict]:
    out = {}
    with open(path) as fh:
        header = tuple(fh.readline().rstrip("\n").split("\t"))
        if header != PREDICTION_HEADER:
            raise SegmentationError(f"{path}: unexpected header {header}")
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(PREDICTION_HEADER):
                raise SegmentationError(f"{path}:{lineno}: expected 6 fields")
            label = int(parts[4])
            if label not in (0, 1):
                raise SegmentationError(f"{path}:{lineno}: label must be 0 or 1")
            out[int(parts[0])] = {"min_x": float(parts[1]), "min_y": float(parts[2]),
                                  "sw": float(parts[3]), "label": label,
                                  "p_max": float(parts[5])}
    return out


def write_stage(path, spec: PatchGridSpec, grid: PredictionGrid) -> None:
    """Write a single-stage grid (from ``classify_stage``) as an exchange file."""
    patches = patch_grid(spec)
    p = grid.p_max if grid.p_max is not None else 0.5 + 0.5 * grid.confidence
    write_predictions(path, patches, grid.labels.ravel(), p.ravel())


def classify_stage(spec: PatchGridSpec, classifier: Classifier, stage_id: int = 1,
                   weight: float = 1.0) -> PredictionGrid:
    """Classify every patch of ``spec``; one grid cell per patch position."""
    patches = patch_grid(spec)
    ny, nx = spec.ny, spec.nx
    labels, p = classifier.predict(patches)
    labels = np.asarray(labels, dtype=np.int8).reshape(ny, nx)
    p = np.asarray(p, dtype=float).reshape(ny, nx)
    conf = confidence(p) * weight if p.size else np.zeros((ny, nx))
    return PredictionGrid(spec.min_x, spec.min_y, spec.stride, labels,
                          np.asarray(conf, dtype=float).reshape(ny, nx),
                          np.full((ny, nx), stage_id, dtype=np.int16), p)


@dataclass
class Stage:
    """One level of the cascade. ``weight`` scales its confidences."""

    sw: float
    classifier: Classifier
    stride: float | None = None
    weight: float = 1.0

    @property
    def step(self) -> float:
        return self.sw / 2 if self.stride is None else self.stride


def _cells_per(length: float, base: float, what: str) -> int:
    n = length / base
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9:
        raise SegmentationError(f"{what} {length} is not a multiple of the base cell {base}")
    return k


def refine_predicate(csum, count, land, unland, threshold: float) -> np.ndarray:
    """Cells to hand to the next stage: low mean confidence or landable vote."""
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, csum / np.maximum(count, 1), 0.0)
    return (mean < threshold) | (land > unland)


def hierarchical_refine(stages: Sequence[Stage], area, threshold: float = DEFAULT_THRESHOLD
                        ) -> PredictionGrid:
    """Run the coarse-to-fine cascade and return the voted base-cell grid.

    Every prediction adds ``conf*label`` to a cell's landable mass and
    ``conf*(1-label)`` to its unlandable mass; the final label is landable
    only when the landable mass is strictly larger. The returned confidence
    is the mean confidence of all predictions a cell received. Cells that
    no patch ever covered stay unlandable with confidence 0.
    """
    if not stages:
        raise SegmentationError("at least one stage is required")
    x0, y0, x1, y1 = _bbox(area)
    base = min(s.step for s in stages)
    nx = int(math.floor((x1 - x0) / base + _EPS))
    ny = int(math.floor((y1 - y0) / base + _EPS))
    land = np.zeros((ny, nx))
    unland = np.zeros((ny, nx))
    csum = np.zeros((ny, nx))
    count = np.zeros((ny, nx), dtype=np.int64)
    last = np.zeros((ny, nx), dtype=np.int16)
    history = []

    for k, stage in enumerate(stages, 1):
        spec = PatchGridSpec.over((x0, y0, x1, y1), stage.sw, stage.step)
        m = _cells_per(spec.stride, base, "stride")
        n = _cells_per(spec.sw, base, "search window")
        if k == 1:
            selected = np.ones((ny, nx), dtype=bool)
        else:
            selected = refine_predicate(csum, count, land, unland, threshold)

        # patches touching at least one selected cell (integral image lookup)
        integ = np.zeros((ny + 1, nx + 1), dtype=np.int64)
        integ[1:, 1:] = np.cumsum(np.cumsum(selected, axis=0), axis=1)
        rows = np.arange(spec.ny)[:, None] * m
        cols = np.arange(spec.nx)[None, :] * m
        hits = (integ[rows + n, cols + n] - integ[rows, cols + n]
                - integ[rows + n, cols] + integ[rows, cols])
        todo = [spec.patch(int(r), int(c)) for r, c in zip(*np.nonzero(hits > 0))]

        if todo:
            labels, p = stage.classifier.predict(todo)
            conf = np.atleast_1d(confidence(np.asarray(p, dtype=float))) * stage.weight
            for patch, lab, c in zip(todo, labels, conf):
                r0, c0 = patch.row * m, patch.col * m
                win = (slice(r0, r0 + n), slice(c0, c0 + n))
                sel = selected[win]
                land[win][sel] += c * lab
                unland[win][sel] += c * (1 - lab)
                csum[win][sel] += c
                count[win][sel] += 1
                last[win][sel] = k
        history.append({"stage": k, "sw": stage.sw, "patches": len(todo),
                        "cells": int(selected.sum()),
                        "area": float(selected.sum()) * base * base})
        log.info("stage %d (sw=%g): %d patches over %.1f m2", k, stage.sw, len(todo),
                 history[-1]["area"])

    labels = (land > unland).astype(np.int8)
    with np.errstate(invalid="ignore", divide="ignore"):
        conf = np.where(count > 0, csum / np.maximum(count, 1), 0.0)
    return PredictionGrid(x0, y0, base, labels, conf, last,
                          meta={"stages": history, "threshold": threshold})


# boundary tracing ---------------------------------------------------------

_RIGHT_OF = {(1, 0): (0, -1), (0, 1): (1, 0), (-1, 0): (0, 1), (0, -1): (-1, 0)}


def _trace_rings(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """Closed boundary rings of a boolean mask in vertex coordinates (col, row).

    Rings keep the mask on their left, so outer rings run counter-clockwise
    and holes clockwise. At pinch vertices the walk turns right, which keeps
    holes separate from the outer ring.
    """
    ny, nx = mask.shape
    pad = np.zeros((ny + 2, nx + 2), dtype=bool)
    pad[1:-1, 1:-1] = mask
    out: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        out.setdefault(a, []).append(b)

    for r, c in zip(*np.nonzero(mask)):
        r, c = int(r), int(c)
        pr, pc = r + 1, c + 1
        if not pad[pr - 1, pc]:
            add((c, r), (c + 1, r))
        if not pad[pr, pc + 1]:
            add((c + 1, r), (c + 1, r + 1))
        if not pad[pr + 1, pc]:
            add((c + 1, r + 1), (c, r + 1))
        if not pad[pr, pc - 1]:
            add((c, r + 1), (c, r))

    rings = []
    while out:
        # start off any pinch vertex so the closing turn is unambiguous
        start = min(v for v, opts in out.items() if len(opts) == 1)
        ring = [start]
        prev, cur = start, out[start].pop()
        if not out[start]:
            del out[start]
        while cur != start:
            ring.append(cur)
            heading = (cur[0] - prev[0], cur[1] - prev[1])
            options = out[cur]
            nxt = options[0]
            if len(options) > 1:
                want = _RIGHT_OF[heading]
                for o in options:
                    if (o[0] - cur[0], o[1] - cur[1]) == want:
                        nxt = o
                        break
            options.remove(nxt)
            if not options:
                del out[cur]
            prev, cur = cur, nxt
        rings.append(ring)
    return rings


def _drop_collinear(ring):
    pts = list(ring)
    keep = []
    n = len(pts)
    for i in range(n):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
        if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) != 0:
            keep.append(b)
    return keep


def mask_to_polygons(grid: PredictionGrid) -> list[GeoPolygon]:
    """Landable regions as polygons, one per 4-connected component."""
    mask = grid.labels == LANDABLE
    comp, n = ndimage.label(mask)  # default structure is 4-connected
    polys = []
    for k, sl in enumerate(ndimage.find_objects(comp), 1):
        sub = comp[sl] == k
        r_off, c_off = sl[0].start, sl[1].start
        outer, holes = None, []
        for ring in _trace_rings(sub):
            ring = _drop_collinear(ring)
            xy = [(grid.origin_x + (c + c_off) * grid.cell, grid.origin_y + (r + r_off) * grid.cell)
                  for c, r in ring]
            area2 = sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(xy, xy[1:] + xy[:1]))
            if area2 > 0:
                outer = xy
            else:
                holes.append(xy)
        polys.append(GeoPolygon(outer, holes))
    return polys


def rasterize(polygons: Sequence[GeoPolygon], like: PredictionGrid) -> np.ndarray:
    """Boolean mask of ``like``'s cells whose centers fall inside any polygon."""
    from .geometry import point_in_polygon

    xs, ys = like.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    mask = np.zeros(like.shape, dtype=bool)
    for poly in polygons:
        mask |= point_in_polygon(poly, gx.ravel(), gy.ravel(), tol=0.0).reshape(like.shape)
    return mask
