"""WKT and GeoJSON encoding for polygons and oriented rectangles.

GeoJSON positions are [x, y] (easting, northing), as RFC 7946 orders them.
Coordinates are written with ``repr`` so that a read-back is exact unless a
fixed number of decimals is requested.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .geometry import GeoPolygon, GeometryError, OrientedRect


def _fmt(v: float, decimals: int | None) -> str:
    if decimals is None:
        return repr(float(v))
    return f"{v:.{decimals}f}"


def _ring_wkt(ring: np.ndarray, decimals) -> str:
    return "(" + ", ".join(f"{_fmt(x, decimals)} {_fmt(y, decimals)}" for x, y in ring) + ")"


def to_wkt(geom, decimals: int | None = None) -> str:
    """WKT ``POLYGON`` text for a GeoPolygon or OrientedRect."""
    if isinstance(geom, OrientedRect):
        corners = geom.corners()
        rings = [np.vstack([corners, corners[:1]])]
    elif isinstance(geom, GeoPolygon):
        rings = geom.rings
    else:
        raise TypeError(f"cannot encode {type(geom).__name__} as WKT")
    return "POLYGON (" + ", ".join(_ring_wkt(r, decimals) for r in rings) + ")"


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def from_wkt(text: str) -> GeoPolygon:
    """Parse a WKT ``POLYGON``."""
    body = text.strip()
    m = re.fullmatch(r"POLYGON\s*\((.*)\)", body, flags=re.IGNORECASE | re.DOTALL)
    if not m:
        raise GeometryError(f"not a WKT POLYGON: {text[:40]!r}")
    rings = []
    for ring_text in re.findall(r"\(([^()]*)\)", m.group(1)):
        pts = []
        for pair in ring_text.split(","):
            nums = re.findall(_NUM, pair)
            if len(nums) < 2:
                raise GeometryError(f"bad WKT coordinate {pair!r}")
            pts.append((float(nums[0]), float(nums[1])))
        rings.append(pts)
    if not rings:
        raise GeometryError("WKT polygon has no rings")
    return GeoPolygon(rings[0], rings[1:])


def to_geojson_geometry(geom, decimals: int | None = None) -> dict:
    if isinstance(geom, OrientedRect):
        corners = geom.corners()
        rings = [np.vstack([corners, corners[:1]])]
    elif isinstance(geom, GeoPolygon):
        rings = geom.rings
    else:
        raise TypeError(f"cannot encode {type(geom).__name__} as GeoJSON")
    if decimals is None:
        coords = [[[float(x), float(y)] for x, y in r] for r in rings]
    else:
        coords = [[[round(float(x), decimals), round(float(y), decimals)] for x, y in r]
                  for r in rings]
    return {"type": "Polygon", "coordinates": coords}


def from_geojson_geometry(obj: dict) -> GeoPolygon:
    if obj.get("type") != "Polygon":
        raise GeometryError(f"unsupported GeoJSON geometry {obj.get('type')!r}")
    rings = [[(float(p[0]), float(p[1])) for p in ring] for ring in obj["coordinates"]]
    return GeoPolygon(rings[0], rings[1:])


def read_features(path) -> list[tuple[GeoPolygon, dict]]:
    """Read polygons and their properties from a GeoJSON file.

    Accepts a FeatureCollection, a single Feature or a bare Polygon.
    MultiPolygon features are split into their parts.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") == "FeatureCollection":
        feats = doc["features"]
    elif doc.get("type") == "Feature":
        feats = [doc]
    else:
        feats = [{"type": "Feature", "geometry": doc, "properties": {}}]
    out = []
    for feat in feats:
        geom = feat["geometry"]
        props = feat.get("properties") or {}
        if geom["type"] == "MultiPolygon":
            for part in geom["coordinates"]:
                out.append((from_geojson_geometry({"type": "Polygon", "coordinates": part}), props))
        else:
            out.append((from_geojson_geometry(geom), props))
    return out


def feature_collection(items, decimals: int | None = None, crs: str | None = None) -> dict:
    """Build a FeatureCollection from ``(geometry, properties)`` pairs."""
    doc = {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": dict(props),
             "geometry": to_geojson_geometry(geom, decimals)}
            for geom, props in items
        ],
    }
    if crs:
        doc["crs"] = {"type": "name", "properties": {"name": crs}}
    return doc


def write_features(path, items, decimals: int | None = None, crs: str | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(feature_collection(items, decimals, crs), fh, indent=1)
        fh.write("\n")
