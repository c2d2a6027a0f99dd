"""Serialisation of landing-field records.

All writers sort records by anchor, angle and length and print floats with
six decimals, so identical inputs give byte-identical files. Infinite
required lengths (direction unusable) are written as ``null`` in GeoJSON,
``inf`` in CSV and ``NULL`` in SQL.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .search import ElfRecord

DECIMALS = 6
FIELDS = ("length", "width", "angle_deg", "slope_fwd_pct", "slope_rev_pct",
          "required_length_fwd", "required_length_rev", "accepted", "wet115", "wet160")


def _f(v: float) -> str:
    out = f"{v:.{DECIMALS}f}"
    return "0.000000" if out == "-0.000000" else out


def _angle_deg(rec: ElfRecord) -> float:
    return math.degrees(rec.rect.angle) % 360.0


def sort_key(rec: ElfRecord):
    r = rec.rect
    return (_f(r.anchor_x), _f(r.anchor_y), _f(_angle_deg(rec)), _f(rec.length))


def sorted_records(records):
    return sorted(records, key=lambda r: tuple(float(v) for v in sort_key(r)))


def _values(rec: ElfRecord) -> dict:
    return {"length": rec.length, "width": rec.width, "angle_deg": _angle_deg(rec),
            "slope_fwd_pct": rec.slope_fwd_pct, "slope_rev_pct": rec.slope_rev_pct,
            "required_length_fwd": rec.required_length_fwd,
            "required_length_rev": rec.required_length_rev,
            "accepted": rec.accepted, "wet115": rec.wet115, "wet160": rec.wet160}


def _ring(rec: ElfRecord) -> np.ndarray:
    c = rec.rect.corners()
    return np.vstack([c, c[:1]])


def _json_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) and not math.isfinite(v):
        return "null"
    return _f(v)


def geojson_text(records, crs: str | None = None) -> str:
    lines = ['{"type": "FeatureCollection",']
    if crs:
        lines.append(f' "crs": {{"type": "name", "properties": {{"name": {json.dumps(crs)}}}}},')
    lines.append(' "features": [')
    feats = []
    for rec in sorted_records(records):
        props = ", ".join(f'"{k}": {_json_value(v)}' for k, v in _values(rec).items())
        coords = ", ".join(f"[{_f(x)}, {_f(y)}]" for x, y in _ring(rec))
        feats.append(f'  {{"type": "Feature", "properties": {{{props}}}, '
                     f'"geometry": {{"type": "Polygon", "coordinates": [[{coords}]]}}}}')
    lines.append(",\n".join(feats))
    lines.append(" ]}")
    return "\n".join(lines) + "\n"


def _wkt(rec: ElfRecord) -> str:
    return "POLYGON ((" + ", ".join(f"{_f(x)} {_f(y)}" for x, y in _ring(rec)) + "))"


def _csv_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if not math.isfinite(v):
        return "inf"
    return _f(v)


def csv_text(records) -> str:
    rows = [",".join(("id",) + FIELDS + ("wkt",))]
    for i, rec in enumerate(sorted_records(records), 1):
        vals = [_csv_value(v) for v in _values(rec).values()]
        rows.append(",".join([str(i)] + vals + [f'"{_wkt(rec)}"']))
    return "\n".join(rows) + "\n"


def _sql_value(v) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if not math.isfinite(v):
        return "NULL"
    return _f(v)


def sql_text(records, table: str = "elf", srid: int | None = 25832) -> str:
    cols = ("id",) + FIELDS + ("geom",)
    out = [f"-- {len(records)} landing fields",
           f"CREATE TABLE IF NOT EXISTS {table} (id INTEGER PRIMARY KEY, "
           + ", ".join(f"{c} {'BOOLEAN' if c in ('accepted', 'wet115', 'wet160') else 'DOUBLE PRECISION'}"
                       for c in FIELDS)
           + ", geom TEXT);"]
    for i, rec in enumerate(sorted_records(records), 1):
        vals = [str(i)] + [_sql_value(v) for v in _values(rec).values()]
        geom = f"'{_wkt(rec)}'"
        if srid is not None:
            geom = f"'SRID={srid};{_wkt(rec)}'"
        out.append(f"INSERT INTO {table} ({', '.join(cols)}) VALUES ({', '.join(vals)}, {geom});")
    return "\n".join(out) + "\n"


def record_to_dict(rec: ElfRecord) -> dict:
    """Lossless JSON-able form (used for intermediate keyed outputs)."""
    r = rec.rect
    d = {k: getattr(rec, k) for k in rec.__dataclass_fields__ if k != "rect"}
    d["rect"] = [r.anchor_x, r.anchor_y, r.length, r.width, r.angle]
    for k, v in d.items():
        if isinstance(v, float) and math.isinf(v):
            d[k] = "inf"
    return d


def record_from_dict(d: dict) -> ElfRecord:
    from .geometry import OrientedRect

    vals = {k: (math.inf if v == "inf" else v) for k, v in d.items() if k != "rect"}
    return ElfRecord(rect=OrientedRect(*d["rect"]), **vals)


def write_all(prefix, records, crs: str | None = None) -> dict[str, str]:
    """Write ``<prefix>.geojson``, ``.csv`` and ``.sql``; returns the paths."""
    paths = {}
    for ext, text in (("geojson", geojson_text(records, crs)), ("csv", csv_text(records)),
                      ("sql", sql_text(records))):
        path = f"{prefix}.{ext}"
        with open(path, "w") as fh:
            fh.write(text)
        paths[ext] = path
    return paths
