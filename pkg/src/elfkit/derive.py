"""Derived terrain layers: IDW surface model, resampling, slope, roughness,
NDVI and hillshade.

All 3x3-window operators leave the outermost ring of cells as nodata and
propagate nodata from any cell of the window. Callers tiling large rasters
must add a one-pixel halo to each tile.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud
from .raster import DEFAULT_NODATA, GridRaster, RasterError

log = logging.getLogger(__name__)

# gdal_grid settings used for the 1 m surface models
IDW_POWER = 2.0
IDW_RADIUS = 1.415
IDW_MAX_POINTS = 16
ZERO_DISTANCE = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Geometry of an output raster without its values."""

    origin_x: float
    origin_y: float
    width: int
    height: int
    res_x: float = 1.0
    res_y: float = 1.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.res_x <= 0 or self.res_y <= 0:
            raise RasterError("grid spec needs positive size and resolution")

    @classmethod
    def of(cls, raster: GridRaster) -> "GridSpec":
        return cls(raster.origin_x, raster.origin_y, raster.width, raster.height,
                   raster.res_x, raster.res_y)

    @classmethod
    def covering(cls, min_x, min_y, max_x, max_y, res: float = 1.0) -> "GridSpec":
        """Smallest grid snapped to multiples of ``res`` that covers a bbox."""
        x0 = math.floor(min_x / res) * res
        y1 = math.ceil(max_y / res) * res
        w = max(1, math.ceil((max_x - x0) / res))
        h = max(1, math.ceil((y1 - min_y) / res))
        return cls(x0, y1, w, h, res, res)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.res_x
        ys = self.origin_y - (np.arange(self.height) + 0.5) * self.res_y
        return xs, ys


def idw_interpolate(
    cloud: PointCloud,
    target: GridSpec,
    power: float = IDW_POWER,
    radius: float = IDW_RADIUS,
    max_points: int = IDW_MAX_POINTS,
    nodata: float = DEFAULT_NODATA,
) -> GridRaster:
    """Grid scattered elevations by nearest-neighbour inverse distance weighting.

    Each cell center takes ``sum(w*z)/sum(w)`` with ``w = d**-power`` over the
    ``max_points`` nearest samples no farther than ``radius``. A sample closer
    than 1e-12 m gives the cell its exact value; cells without samples get
    ``nodata``.
    """
    if radius <= 0 or max_points < 1:
        raise ValueError("radius must be > 0 and max_points >= 1")
    xs, ys = target.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    out = np.full(gx.shape, nodata, dtype=float)
    if len(cloud) == 0:
        return GridRaster(out, target.origin_x, target.origin_y, target.res_x, target.res_y, nodata)

    pts = cloud.xyz
    tree = cKDTree(pts[:, :2])
    k = min(max_points, len(pts))
    # pad the bound a hair so that samples exactly on the radius are returned
    dist, idx = tree.query(np.column_stack([gx.ravel(), gy.ravel()]), k=k,
                           distance_upper_bound=radius * (1 + 1e-12))
    dist = dist.reshape(-1, k)
    idx = idx.reshape(-1, k)
    hit = np.isfinite(dist) & (dist <= radius)
    safe_idx = np.where(hit, idx, 0)
    z = pts[safe_idx, 2]

    with np.errstate(divide="ignore"):
        w = np.where(hit, np.power(np.where(hit, dist, 1.0), -power), 0.0)
    wsum = w.sum(axis=1)
    flat = out.ravel()
    have = hit.any(axis=1)
    with np.errstate(invalid="ignore"):  # inf weights of exact hits, replaced below
        flat[have] = (w[have] * z[have]).sum(axis=1) / wsum[have]

    # exact hits: query results are sorted by distance, column 0 is nearest
    exact = hit[:, 0] & (dist[:, 0] < ZERO_DISTANCE)
    flat[exact] = z[exact, 0]
    return GridRaster(flat.reshape(gx.shape), target.origin_x, target.origin_y,
                      target.res_x, target.res_y, nodata)


def sample_bilinear(src: GridRaster, x, y) -> np.ndarray:
    """Bilinear interpolation between the four surrounding cell centers.

    Points outside the hull of cell centers are clamped to the edge. A
    result is nodata when any of the four corners is nodata.
    """
    if src.width < 2 or src.height < 2:
        raise RasterError("bilinear sampling needs at least 2x2 cells")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = np.clip((x - src.origin_x) / src.res_x - 0.5, 0.0, src.width - 1)
    fy = np.clip((src.origin_y - y) / src.res_y - 0.5, 0.0, src.height - 1)
    c0 = np.minimum(np.floor(fx).astype(int), src.width - 2)
    r0 = np.minimum(np.floor(fy).astype(int), src.height - 2)
    tx = fx - c0
    ty = fy - r0
    v = src.values
    v00, v01 = v[r0, c0], v[r0, c0 + 1]
    v10, v11 = v[r0 + 1, c0], v[r0 + 1, c0 + 1]
    out = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v01 + (1 - tx) * ty * v10 + tx * ty * v11
    nd = src.nodata
    bad = (v00 == nd) | (v01 == nd) | (v10 == nd) | (v11 == nd)
    return np.where(bad, nd, out)


def resample_to(src: GridRaster, target: GridSpec) -> GridRaster:
    """Bilinearly sample ``src`` at every cell center of ``target``."""
    xs, ys = target.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    vals = sample_bilinear(src, gx, gy)
    return GridRaster(vals, target.origin_x, target.origin_y, target.res_x, target.res_y,
                      src.nodata, src.crs)


def bilinear_resample(src: GridRaster, resolution) -> GridRaster:
    """Resample to a new resolution over the same extent.

    ``resolution`` is one value for square cells or an ``(res_x, res_y)`` pair.
    """
    rx, ry = (resolution, resolution) if np.isscalar(resolution) else resolution
    if rx <= 0 or ry <= 0:
        raise RasterError("target resolution must be positive")
    width = max(1, int(round(src.width * src.res_x / rx)))
    height = max(1, int(round(src.height * src.res_y / ry)))
    return resample_to(src, GridSpec(src.origin_x, src.origin_y, width, height, rx, ry))


def _window_stack(raster: GridRaster) -> np.ndarray:
    """3x3 neighbourhoods of interior cells, shape (9, h-2, w-2), row-major a..i."""
    v = raster.values
    h, w = v.shape
    return np.stack([v[r:h - 2 + r, c:w - 2 + c] for r in range(3) for c in range(3)])


def _interior_result(raster: GridRaster, win: np.ndarray, interior: np.ndarray) -> GridRaster:
    out = np.full(raster.shape, raster.nodata, dtype=float)
    ok = np.all(win != raster.nodata, axis=0)
    out[1:-1, 1:-1] = np.where(ok, interior, raster.nodata)
    return raster.with_values(out)


def _horn(raster: GridRaster):
    if raster.res_x != raster.res_y:
        raise RasterError(f"slope needs square cells, got {raster.res_x} x {raster.res_y}")
    if raster.width < 3 or raster.height < 3:
        raise RasterError("3x3 operators need at least 3x3 cells")
    win = _window_stack(raster)
    a, b, c, d, _, f, g, h, i = win
    res = raster.res_x
    with np.errstate(invalid="ignore", over="ignore"):
        dzdx = ((c + 2 * f + i) - (a + 2 * d + g)) / (8 * res)
        # rows run south, so north-positive dz/dy compares the top row to the bottom
        dzdy = ((a + 2 * b + c) - (g + 2 * h + i)) / (8 * res)
    return win, dzdx, dzdy


def slope(dsm: GridRaster, units: str = "percent") -> GridRaster:
    """Horn slope in ``"degrees"`` or ``"percent"``."""
    if units not in ("degrees", "percent"):
        raise ValueError(f"unknown slope units {units!r}")
    win, dzdx, dzdy = _horn(dsm)
    grad = np.hypot(dzdx, dzdy)
    vals = np.degrees(np.arctan(grad)) if units == "degrees" else 100.0 * grad
    return _interior_result(dsm, win, vals)


def roughness(dsm: GridRaster) -> GridRaster:
    """Largest minus smallest value of each 3x3 neighbourhood."""
    if dsm.width < 3 or dsm.height < 3:
        raise RasterError("3x3 operators need at least 3x3 cells")
    win = _window_stack(dsm)
    return _interior_result(dsm, win, win.max(axis=0) - win.min(axis=0))


def ndvi(nir: GridRaster, red: GridRaster) -> GridRaster:
    """(NIR - Red) / (NIR + Red), clamped to [-1, 1]; zero sums become nodata."""
    if not nir.aligned_with(red):
        raise RasterError("NIR and red rasters are not aligned")
    n, r = nir.values, red.values
    total = n + r
    ok = nir.valid & red.valid & (total != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.clip((n - r) / total, -1.0, 1.0)
    nodata = nir.nodata
    return nir.with_values(np.where(ok, vals, nodata), nodata)


def hillshade(dsm: GridRaster, azimuth: float = 315.0, altitude: float = 45.0) -> GridRaster:
    """Lambertian shaded relief in grey levels 0..255.

    ``azimuth`` is the light direction in degrees clockwise from north and
    ``altitude`` its elevation above the horizon.
    """
    win, dzdx, dzdy = _horn(dsm)
    az, alt = math.radians(azimuth), math.radians(altitude)
    light = (math.sin(az) * math.cos(alt), math.cos(az) * math.cos(alt), math.sin(alt))
    norm = np.sqrt(dzdx * dzdx + dzdy * dzdy + 1.0)
    cos_inc = (-dzdx * light[0] - dzdy * light[1] + light[2]) / norm
    shade = np.rint(255.0 * np.clip(cos_inc, 0.0, 1.0))
    return _interior_result(dsm, win, shade)
