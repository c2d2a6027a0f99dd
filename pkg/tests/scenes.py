"""Synthetic DSM scenes with known landable regions."""

import os

import numpy as np

from elfkit.raster import GridRaster, write_elfr

# field x in (48, 348), y in (48, 108) on a 400 x 160 m grid
FIELD = (48.0, 48.0, 348.0, 108.0)
DITCH_X = 330.0
DITCH_HALF = 6.0


def rough_terrain(width, height, flat=None, ditch=False):
    """1 m DSM: undulating terrain with an optional perfectly flat rectangle
    (min_x, min_y, max_x, max_y) and a V-shaped ditch across it at DITCH_X.
    The ditch walls are 17.7 % steep."""
    xs = np.arange(width) + 0.5
    ys = height - (np.arange(height) + 0.5)
    X, Y = np.meshgrid(xs, ys)
    z = 100 + 4 * np.sin(X / 5) * np.cos(Y / 4) + 2 * np.sin(X / 2.3 + Y / 3.1)
    if flat is not None:
        x0, y0, x1, y1 = flat
        inside = (X > x0) & (X < x1) & (Y > y0) & (Y < y1)
        z = np.where(inside, 100.0, z)
        if ditch:
            near = inside & (np.abs(X - DITCH_X) < DITCH_HALF)
            z = np.where(near, 100.0 - 0.177 * (DITCH_HALF - np.abs(X - DITCH_X)), z)
    return GridRaster(z, 0.0, float(height), 1.0, 1.0)


def flat(width, height, z=100.0):
    return GridRaster(np.full((height, width), z), 0.0, float(height), 1.0, 1.0)


def write_scene(directory, dsm, **config):
    """Write ``dsm.elfr`` and ``run.cfg`` into ``directory``; return the config path."""
    os.makedirs(directory, exist_ok=True)
    write_elfr(os.path.join(directory, "dsm.elfr"), dsm)
    lines = ["input.dsm = dsm.elfr", "output.dir = out"]
    lines += [f"{k.replace('__', '.')} = {v}" for k, v in config.items()]
    path = os.path.join(directory, "run.cfg")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
