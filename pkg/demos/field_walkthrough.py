"""Find landing fields in a synthetic scene, step by step.

A 300 x 60 m flat meadow sits in undulating terrain; a second copy of the
scene has a V-shaped ditch (17.7 % walls) cut across the meadow near its
east end. Both scenes go through the full pipeline: derived rasters, the
three-stage slope-oracle cascade, the rotation sweep and the ground-roll
check.

    python3 demos/field_walkthrough.py [output_dir]
"""

import json
import logging
import os
import sys
import tempfile

import numpy as np

from elfkit.groundroll import AircraftConfig, Atmosphere, ground_roll_distance, required_length
from elfkit.pipeline import run_pipeline
from elfkit.raster import GridRaster, write_elfr

FIELD = (48.0, 48.0, 348.0, 108.0)
DITCH_X = 330.0


def terrain(ditch: bool) -> GridRaster:
    xs = np.arange(400) + 0.5
    ys = 160 - (np.arange(160) + 0.5)
    X, Y = np.meshgrid(xs, ys)
    z = 100 + 4 * np.sin(X / 5) * np.cos(Y / 4) + 2 * np.sin(X / 2.3 + Y / 3.1)
    x0, y0, x1, y1 = FIELD
    inside = (X > x0) & (X < x1) & (Y > y0) & (Y < y1)
    z = np.where(inside, 100.0, z)
    if ditch:
        near = inside & (np.abs(X - DITCH_X) < 6)
        z = np.where(near, 100.0 - 0.177 * (6 - np.abs(X - DITCH_X)), z)
    return GridRaster(z, 0.0, 160.0, 1.0, 1.0)


def run_scene(base: str, name: str, ditch: bool) -> None:
    d = os.path.join(base, name)
    os.makedirs(d, exist_ok=True)
    write_elfr(os.path.join(d, "dsm.elfr"), terrain(ditch))
    cfg = os.path.join(d, "run.cfg")
    with open(cfg, "w") as fh:
        fh.write("input.dsm = dsm.elfr\noutput.dir = out\n"
                 "segment.stages = 32:oracle,16:oracle,8:oracle\n"
                 "segment.slope_threshold = 10\nsearch.surface_factor = 1.15\n")
    s = run_pipeline(cfg)
    print(f"\n{name}: {s['polygons']} landable polygon(s), {s['landable_area']:.0f} m2, "
          f"{s['candidates']} candidates, {s['accepted']} accepted")
    with open(os.path.join(d, "out", "elfs.geojson")) as fh:
        doc = json.load(fh)
    for f in doc["features"]:
        p = f["properties"]
        xs = [c[0] for c in f["geometry"]["coordinates"][0]]
        print(f"  {p['length']:8.2f} m at {p['angle_deg']:6.2f} deg, x {min(xs):6.1f}..{max(xs):6.1f}"
              f", slope {p['slope_fwd_pct']:+.2f} %, needs {p['required_length_fwd']:.1f} m"
              f" -> {'accepted' if p['accepted'] else 'rejected'}")


def main() -> None:
    logging.basicConfig(level=logging.WARNING)
    base = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="elfkit-demo-")
    air, atm = AircraftConfig(), Atmosphere()
    s = ground_roll_distance(air, atm, 0.0)
    print(f"DA20 ground roll on flat ground: {s:.3f} m, "
          f"on grass (x1.15): {required_length(s, 1.15):.3f} m")
    run_scene(base, "meadow", ditch=False)
    run_scene(base, "meadow_with_ditch", ditch=True)
    print(f"\noutputs in {base}")


if __name__ == "__main__":
    main()
