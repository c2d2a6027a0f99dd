"""Planar geometry primitives in a projected metric CRS.

Polygons, oriented rectangles and point clouds are plain immutable values.
Coordinates are meters; angles are radians, counter-clockwise positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

# boundary tolerance for containment tests, meters
BOUNDARY_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or malformed geometry."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:-1, 0], ring[:-1, 1]
    x1, y1 = ring[1:, 0], ring[1:, 1]
    return 0.5 * float(np.sum(x * y1 - x1 * y))


def _canonical_ring(coords, ccw: bool) -> np.ndarray:
    pts = np.asarray(coords, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError("ring must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("ring coordinates must be finite")
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    # drop consecutive duplicates
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 3:
        raise GeometryError("ring needs at least 3 distinct vertices")
    # start at the lexicographically smallest vertex so that vertex order
    # and starting point of the input never matter downstream
    start = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    pts = np.roll(pts, -start, axis=0)
    area = _signed_area(np.vstack([pts, pts[:1]]))
    if area != 0.0 and (area > 0) != ccw:
        pts = np.roll(pts[::-1], 1, axis=0)
    ring = np.vstack([pts, pts[:1]])
    # judge the stored ring itself: slivers whose rounded area depends on
    # the starting vertex must not survive as rings that fail to re-parse
    area = _signed_area(ring)
    if area == 0.0 or (area > 0) != ccw:
        raise GeometryError("ring has zero area")
    return ring


@dataclass(frozen=True, eq=False)
class GeoPolygon:
    """Polygon with an exterior ring and optional holes.

    Rings are stored closed (first vertex == last). The exterior is
    normalised to counter-clockwise order and holes to clockwise order,
    each starting at its lexicographically smallest vertex.
    """

    exterior: np.ndarray
    holes: tuple = ()

    def __init__(self, exterior, holes: Sequence = ()):
        object.__setattr__(self, "exterior", _frozen(_canonical_ring(exterior, ccw=True)))
        object.__setattr__(
            self, "holes", tuple(_frozen(_canonical_ring(h, ccw=False)) for h in holes)
        )

    @classmethod
    def _from_rings(cls, exterior: np.ndarray, holes=()) -> "GeoPolygon":
        # rings already canonical (e.g. produced by a rigid motion)
        obj = cls.__new__(cls)
        object.__setattr__(obj, "exterior", _frozen(exterior))
        object.__setattr__(obj, "holes", tuple(_frozen(h) for h in holes))
        return obj

    @property
    def rings(self) -> tuple:
        return (self.exterior,) + self.holes

    @property
    def area(self) -> float:
        return sum(_signed_area(r) for r in self.rings)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of every ring edge, shape (m, 2) each."""
        return self._edges

    @cached_property
    def _edges(self):
        starts = np.vstack([r[:-1] for r in self.rings])
        ends = np.vstack([r[1:] for r in self.rings])
        starts.setflags(write=False)
        ends.setflags(write=False)
        return starts, ends

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges cross or overlap.

        Touching at a shared vertex is tolerated (traced raster outlines
        produce such pinch points).
        """
        a, b = self.edges()
        m = len(a)
        for i in range(m):
            for j in range(i + 1, m):
                if _segments_cross(a[i], b[i], a[j], b[j]):
                    return False
        return True

    def __eq__(self, other):
        if not isinstance(other, GeoPolygon):
            return NotImplemented
        return (
            np.array_equal(self.exterior, other.exterior)
            and len(self.holes) == len(other.holes)
            and all(np.array_equal(h, k) for h, k in zip(self.holes, other.holes))
        )

    def __hash__(self):
        return hash((self.exterior.tobytes(), tuple(h.tobytes() for h in self.holes)))


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper crossing or collinear overlap of two segments."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == d2 == d3 == d4 == 0:
        # collinear: overlapping with positive length?
        axis = 0 if abs(p2[0] - p1[0]) >= abs(p2[1] - p1[1]) else 1
        lo1, hi1 = sorted((p1[axis], p2[axis]))
        lo2, hi2 = sorted((q1[axis], q2[axis]))
        return min(hi1, hi2) - max(lo1, lo2) > 0
    return False


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle given by a corner anchor, extents and a rotation.

    The local x axis (``length``) points along ``angle`` from the anchor;
    the local y axis (``width``) is 90 degrees counter-clockwise from it.
    ``angle`` rotates the rectangle about its anchor.
    """

    anchor_x: float
    anchor_y: float
    length: float
    width: float
    angle: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise GeometryError("rectangle length and width must be positive")
        if not all(math.isfinite(v) for v in (self.anchor_x, self.anchor_y, self.angle)):
            raise GeometryError("rectangle fields must be finite")

    @property
    def axes(self) -> tuple[tuple[float, float], tuple[float, float]]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return (c, s), (-s, c)

    def corners(self) -> np.ndarray:
        """Corners (0,0), (L,0), (L,W), (0,W) in world coordinates."""
        (ux, uy), (vx, vy) = self.axes
        local = ((0.0, 0.0), (self.length, 0.0), (self.length, self.width), (0.0, self.width))
        return np.array(
            [(self.anchor_x + a * ux + b * vx, self.anchor_y + a * uy + b * vy) for a, b in local]
        )

    def center(self) -> tuple[float, float]:
        (ux, uy), (vx, vy) = self.axes
        hl, hw = 0.5 * self.length, 0.5 * self.width
        return (self.anchor_x + hl * ux + hw * vx, self.anchor_y + hl * uy + hw * vy)

    def center_line(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Start and end point of the long-axis center line."""
        (ux, uy), (vx, vy) = self.axes
        hw = 0.5 * self.width
        x0, y0 = self.anchor_x + hw * vx, self.anchor_y + hw * vy
        return (x0, y0), (x0 + self.length * ux, y0 + self.length * uy)

    def with_length(self, length: float) -> "OrientedRect":
        return OrientedRect(self.anchor_x, self.anchor_y, length, self.width, self.angle)

    def shrink(self, factor: float) -> "OrientedRect":
        """Scale about the center by ``factor`` (0 < factor)."""
        cx, cy = self.center()
        (ux, uy), (vx, vy) = self.axes
        hl, hw = 0.5 * self.length * factor, 0.5 * self.width * factor
        return OrientedRect(
            cx - hl * ux - hw * vx, cy - hl * uy - hw * vy, 2 * hl, 2 * hw, self.angle
        )

    def to_polygon(self) -> GeoPolygon:
        return GeoPolygon(self.corners())


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Scattered (x, y, z) samples; may be empty."""

    xyz: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    def __init__(self, xyz=None):
        arr = np.empty((0, 3)) if xyz is None else np.asarray(xyz, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(arr)):
            raise GeometryError("point cloud coordinates must be finite")
        object.__setattr__(self, "xyz", _frozen(arr))

    def __len__(self):
        return len(self.xyz)


Geometry = Union[GeoPolygon, OrientedRect, np.ndarray, tuple]


def centroid(polygon: GeoPolygon) -> tuple[float, float]:
    """Area-weighted centroid of the exterior ring."""
    ring = polygon.exterior
    x, y = ring[:-1, 0], ring[:-1, 1]
    x1, y1 = ring[1:, 0], ring[1:, 1]
    cross = x * y1 - x1 * y
    area = 0.5 * float(np.sum(cross))
    if area == 0.0:
        raise GeometryError("degenerate polygon has no centroid")
    cx = float(np.sum((x + x1) * cross)) / (6.0 * area)
    cy = float(np.sum((y + y1) * cross)) / (6.0 * area)
    return cx, cy


def _rotate_points(pts: np.ndarray, angle: float, pivot) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    px, py = pivot
    dx, dy = pts[..., 0] - px, pts[..., 1] - py
    return np.stack([px + c * dx - s * dy, py + s * dx + c * dy], axis=-1)


def rotate(geometry: Geometry, angle: float, pivot=(0.0, 0.0)) -> Geometry:
    """Rotate counter-clockwise by ``angle`` radians about ``pivot``.

    Accepts a GeoPolygon, an OrientedRect, a single (x, y) point or an
    (n, 2) coordinate array and returns the same kind of object.
    """
    if not math.isfinite(angle):
        raise GeometryError("rotation angle must be finite")
    if angle == 0.0:
        return geometry
    if isinstance(geometry, GeoPolygon):
        return GeoPolygon._from_rings(
            _rotate_points(geometry.exterior, angle, pivot),
            [_rotate_points(h, angle, pivot) for h in geometry.holes],
        )
    if isinstance(geometry, OrientedRect):
        ax, ay = _rotate_points(np.array([geometry.anchor_x, geometry.anchor_y]), angle, pivot)
        return OrientedRect(float(ax), float(ay), geometry.length, geometry.width,
                            geometry.angle + angle)
    pts = np.asarray(geometry, dtype=float)
    out = _rotate_points(pts, angle, pivot)
    if isinstance(geometry, tuple):
        return (float(out[0]), float(out[1]))
    return out


def polygon_limits(polygon: GeoPolygon) -> tuple[float, float, float, float]:
    """Bounding box of the exterior ring as (y_min, y_max, x_min, x_max)."""
    ring = polygon.exterior
    return (float(ring[:, 1].min()), float(ring[:, 1].max()),
            float(ring[:, 0].min()), float(ring[:, 0].max()))


def point_in_polygon(polygon: GeoPolygon, x, y, tol: float = BOUNDARY_TOL):
    """Even-odd containment for scalar or array points; boundary counts as inside."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    a, b = polygon.edges()
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    X, Y = xs[:, None], ys[:, None]

    straddle = (ay > Y) != (by > Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = ax + (Y - ay) * (bx - ax) / (by - ay)
    inside = np.sum(straddle & (X < xcross), axis=1) % 2 == 1

    # distance to each edge for the boundary test
    ex, ey = bx - ax, by - ay
    len2 = ex * ex + ey * ey
    t = np.clip(((X - ax) * ex + (Y - ay) * ey) / len2, 0.0, 1.0)
    d2 = (ax + t * ex - X) ** 2 + (ay + t * ey - Y) ** 2
    on_edge = np.any(d2 <= tol * tol, axis=1)

    res = inside | on_edge
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return bool(res[0])
    return res


def _crosses_open_box(u0, v0, u1, v1, length, width, tol) -> np.ndarray:
    """Whether each segment (u0,v0)-(u1,v1) meets the open box
    (tol, length-tol) x (tol, width-tol). Arrays broadcast; the box sizes
    may be arrays too (Liang-Barsky clipping)."""
    shape = np.broadcast(u0, v0, u1, v1, length, width).shape
    t_lo = np.zeros(shape)
    t_hi = np.ones(shape)
    for p0, p1, lo, hi in ((u0, u1, tol, length - tol), (v0, v1, tol, width - tol)):
        d = p1 - p0
        flat = d == 0.0
        inside = (p0 > lo) & (p0 < hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - p0) / d
            tb = (hi - p0) / d
        enter = np.where(flat, np.where(inside, -np.inf, np.inf), np.minimum(ta, tb))
        leave = np.where(flat, np.where(inside, np.inf, -np.inf), np.maximum(ta, tb))
        t_lo = np.maximum(t_lo, enter)
        t_hi = np.minimum(t_hi, leave)
    return t_lo < t_hi


def contains(polygon: GeoPolygon, rect: OrientedRect, tol: float = BOUNDARY_TOL) -> bool:
    """True iff ``rect`` lies inside ``polygon`` (boundary contact allowed).

    No polygon edge (exterior or hole) may pass through the rectangle's
    interior, and the rectangle center must be inside the polygon. Together
    these imply that all four corners and edges are covered, which also
    rejects rectangles bridging the notch of a concave polygon. ``tol``
    shrinks the rectangle interior so that round-off contact at the
    boundary does not count as a crossing.
    """
    a, b = polygon.edges()
    (ux, uy), (vx, vy) = rect.axes
    ox, oy = rect.anchor_x, rect.anchor_y
    u0 = (a[:, 0] - ox) * ux + (a[:, 1] - oy) * uy
    v0 = (a[:, 0] - ox) * vx + (a[:, 1] - oy) * vy
    u1 = (b[:, 0] - ox) * ux + (b[:, 1] - oy) * uy
    v1 = (b[:, 0] - ox) * vx + (b[:, 1] - oy) * vy
    if np.any(_crosses_open_box(u0, v0, u1, v1, rect.length, rect.width, tol)):
        return False
    cx, cy = rect.center()
    return bool(point_in_polygon(polygon, cx, cy, tol=tol))


def contains_boxes(polygon: GeoPolygon, x0, y0, length, width,
                   tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorised ``contains`` for axis-aligned boxes ``[x0, x0+length] x [y0, y0+width]``.

    Gives exactly the answer ``contains`` gives for the equivalent
    zero-angle OrientedRect.
    """
    x0, y0, length, width = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (x0, y0, length, width)))
    a, b = polygon.edges()
    u0 = a[:, 0][:, None] - x0[None, :]
    v0 = a[:, 1][:, None] - y0[None, :]
    u1 = b[:, 0][:, None] - x0[None, :]
    v1 = b[:, 1][:, None] - y0[None, :]
    blocked = np.any(_crosses_open_box(u0, v0, u1, v1, length[None, :], width[None, :], tol),
                     axis=0)
    out = np.zeros(len(x0), dtype=bool)
    free = ~blocked
    if np.any(free):
        cx = x0[free] + 0.5 * length[free]
        cy = y0[free] + 0.5 * width[free]
        out[free] = point_in_polygon(polygon, cx, cy, tol=tol)
    return out
