"""Rectangular landing-field search inside landable polygons and the
slope/length check of every candidate.

The sweep rotates the polygon about its centroid in 4 degree steps and
slides an axis-aligned rectangle over the rotated shape in 1 m steps,
stacking rows at half the rectangle width. Whenever the rectangle fits it
is stretched metre by metre along +x until it no longer fits, the longest
fitting version is kept and the sweep jumps ahead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .derive import sample_bilinear
from .geometry import (GeoPolygon, OrientedRect, centroid, contains_boxes, polygon_limits,
                       rotate)
from .groundroll import (GRASS_FIRM, WET_SHORT_GRASS, AircraftConfig, Atmosphere,
                         GroundRollError, ground_roll_distance, required_length,
                         required_length_at_slope)
from .raster import GridRaster

log = logging.getLogger(__name__)

ANGLES_DEG = tuple(range(0, 180, 4))
MAX_DOWNSLOPE_PCT = -10.0
WIDTH_FACTOR = 3.0
# steepest uphill slope assumed when sizing the search rectangle (Courchevel)
SEARCH_UPHILL_PCT = 18.66
SLOPE_METHODS = ("max_abs", "regression", "endpoint")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    angle_deg: int
    y_offset: float
    x_shift: float
    growth: int
    local: OrientedRect  # in the rotated frame
    rect: OrientedRect  # back in world coordinates


def default_elf_width(config: AircraftConfig) -> float:
    return WIDTH_FACTOR * config.wing_span


def default_elf_length(config: AircraftConfig, atm: Atmosphere = Atmosphere(),
                       surface_factor: float = GRASS_FIRM) -> float:
    return required_length_at_slope(config, atm, SEARCH_UPHILL_PCT, surface_factor)


def sweep(polygon: GeoPolygon, elf_length: float, elf_width: float,
          angles_deg=ANGLES_DEG) -> list[Placement]:
    """Every placement of the rotation sweep, in discovery order."""
    if elf_length <= 0 or elf_width <= 0:
        raise ValueError("ELF length and width must be positive")
    pivot = centroid(polygon)
    stride = elf_width / 2
    found = []
    for deg in angles_deg:
        angle = math.radians(deg)
        poi = rotate(polygon, angle, pivot) if angle != 0 else polygon
        y_min, y_max, x_min, x_max = polygon_limits(poi)
        span_x = x_max - x_min
        if span_x < elf_length or y_max - y_min < elf_width:
            continue
        n_rows = int((y_max - y_min) / stride) + 1
        n_shift = int(math.floor(span_x - elf_length)) + 1
        shifts = np.arange(n_shift, dtype=float)
        for i in range(n_rows + 1):
            y0 = y_min + i * stride
            fits = contains_boxes(poi, x_min + shifts, y0, elf_length, elf_width)
            if not fits.any():
                continue
            x_shift = 0.0
            while span_x - x_shift >= elf_length:
                k = int(x_shift)
                if not fits[k]:
                    x_shift += 1
                    continue
                growth = _grow(poi, x_min + x_shift, y0, elf_length, elf_width, x_max)
                resize = growth + 2  # loop counter value when stretching stops
                local = OrientedRect(x_min + x_shift, y0, elf_length + growth, elf_width)
                world = rotate(local, -angle, pivot) if angle != 0 else local
                found.append(Placement(deg, i * stride, x_shift, growth, local, world))
                x_shift += resize + 1
    return found


def _grow(poi: GeoPolygon, x0: float, y0: float, length: float, width: float,
          x_max: float) -> int:
    """Number of whole metres the fitting box at x0 can be stretched along +x."""
    # candidate stretches up to one past the bounding box; the first miss stops growth
    limit = int(math.floor(x_max - x0 - length)) + 2
    if limit <= 0:
        return 0
    extra = np.arange(1, limit + 1, dtype=float)
    ok = contains_boxes(poi, x0, y0, length + extra, width)
    misses = np.flatnonzero(~ok)
    return int(misses[0]) if misses.size else limit


def find_elfs(polygon: GeoPolygon, elf_length: float, elf_width: float,
              angles_deg=ANGLES_DEG) -> list[OrientedRect]:
    """Rectangles of at least ``elf_length`` x ``elf_width`` found by the sweep."""
    return [p.rect for p in sweep(polygon, elf_length, elf_width, angles_deg)]


def center_line_profile(dsm: GridRaster, rect: OrientedRect, sample_step: float = 1.0
                        ) -> np.ndarray:
    """(distance, z) pairs along the long axis, measured from the anchor end."""
    if sample_step <= 0:
        raise ValueError("sample step must be positive")
    min_x, min_y, max_x, max_y = dsm.bounds
    corners = rect.corners()
    if (corners[:, 0].min() < min_x or corners[:, 0].max() > max_x
            or corners[:, 1].min() < min_y or corners[:, 1].max() > max_y):
        raise ProfileError("rectangle extends beyond the surface model")
    n = int(math.floor(rect.length / sample_step + 1e-9))
    dist = np.arange(n + 1) * sample_step
    if rect.length - dist[-1] > 1e-9:
        dist = np.append(dist, rect.length)
    (x0, y0), _ = rect.center_line()
    (ux, uy), _ = rect.axes
    z = sample_bilinear(dsm, x0 + dist * ux, y0 + dist * uy)
    bad = np.flatnonzero(z == dsm.nodata)
    if bad.size:
        stations = ", ".join(f"{d:g}" for d in dist[bad][:10])
        raise ProfileError(f"nodata at {bad.size} profile stations (m): {stations}")
    return np.column_stack([dist, z])


def profile_slope(profile) -> tuple[float, float]:
    """Least-squares and end-to-end gradient of a profile, in percent."""
    prof = np.asarray(profile, dtype=float)
    if len(prof) < 2:
        raise ProfileError("a slope needs at least two samples")
    d, z = prof[:, 0], prof[:, 1]
    total = d[-1] - d[0]
    if total == 0:
        raise ProfileError("profile has zero length")
    dc = d - d.mean()
    reg = float(np.sum(dc * (z - z.mean())) / np.sum(dc * dc))
    end = float((z[-1] - z[0]) / total)
    return 100.0 * reg, 100.0 * end


def pick_slope(regression_pct: float, endpoint_pct: float, method: str = "max_abs") -> float:
    if method == "regression":
        return regression_pct
    if method == "endpoint":
        return endpoint_pct
    if method == "max_abs":
        return regression_pct if abs(regression_pct) >= abs(endpoint_pct) else endpoint_pct
    raise ValueError(f"unknown slope method {method!r}")


@dataclass(frozen=True)
class ElfRecord:
    rect: OrientedRect
    length: float
    width: float
    slope_fwd_pct: float
    slope_rev_pct: float
    required_length_fwd: float
    required_length_rev: float
    accepted: bool
    wet115: bool
    wet160: bool
    regression_pct: float = 0.0
    endpoint_pct: float = 0.0
    surface_factor: float = GRASS_FIRM


def _usable(length, slope_pct, req) -> bool:
    return length >= req and slope_pct > MAX_DOWNSLOPE_PCT


def evaluate_elf(rect: OrientedRect, dsm: GridRaster, config: AircraftConfig,
                 atm: Atmosphere = Atmosphere(), surface_factor: float = GRASS_FIRM,
                 sample_step: float = 1.0, slope_method: str = "max_abs") -> ElfRecord:
    """Measure the slope of a candidate and check its length in both directions.

    A direction is usable when the rectangle is at least as long as the
    required landing length at that direction's slope and the slope is not
    steeper than -10 %. Directions in which the aircraft would not stop
    get an infinite required length.
    """
    reg, end = profile_slope(center_line_profile(dsm, rect, sample_step))
    fwd = pick_slope(reg, end, slope_method)
    rev = -fwd
    rolls = {}
    for s in (fwd, rev):
        try:
            rolls[s] = ground_roll_distance(config, atm, math.atan(s / 100.0))
        except GroundRollError:
            rolls[s] = math.inf

    def req(s, factor):
        roll = rolls[s]
        return math.inf if math.isinf(roll) else required_length(roll, factor, s)

    def ok(factor):
        return any(_usable(rect.length, s, req(s, factor)) for s in (fwd, rev))

    return ElfRecord(rect, rect.length, rect.width, fwd, rev, req(fwd, surface_factor),
                     req(rev, surface_factor), ok(surface_factor), ok(GRASS_FIRM),
                     ok(WET_SHORT_GRASS), reg, end, surface_factor)


def search_polygon(polygon: GeoPolygon, dsm: GridRaster, config: AircraftConfig,
                   atm: Atmosphere = Atmosphere(), surface_factor: float = GRASS_FIRM,
                   elf_length: float | None = None, elf_width: float | None = None,
                   angles_deg=ANGLES_DEG, slope_method: str = "max_abs") -> list[ElfRecord]:
    """Sweep one polygon and evaluate every candidate that lies on the DSM."""
    length = default_elf_length(config, atm, surface_factor) if elf_length is None else elf_length
    width = default_elf_width(config) if elf_width is None else elf_width
    records = []
    for rect in find_elfs(polygon, length, width, angles_deg):
        try:
            records.append(evaluate_elf(rect, dsm, config, atm, surface_factor,
                                        slope_method=slope_method))
        except ProfileError as exc:
            log.warning("skipping candidate at (%.1f, %.1f): %s", rect.anchor_x,
                        rect.anchor_y, exc)
    return records
