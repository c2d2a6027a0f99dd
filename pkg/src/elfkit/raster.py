"""Single-band georeferenced rasters and their file formats.

Binary ``.elfr`` layout (all little-endian):

    offset  size  field
    0       8     magic  b"ELFR1\\0\\0\\0"
    8       8     width   (uint64)
    16      8     height  (uint64)
    24      8     origin_x (float64, top-left corner)
    32      8     origin_y (float64, top-left corner)
    40      8     res_x   (float64, meters/pixel)
    48      8     res_y   (float64, meters/pixel, positive, rows go south)
    56      8     nodata  (float64)
    64      8     reserved (uint64, written as 0)
    72      ...   width*height float64 values, row-major from the north row

ASCII grids follow the ESRI ``.asc`` convention (lower-left corner keys);
non-square cells are written with GDAL's ``dx``/``dy`` keys.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

DEFAULT_NODATA = -2147483648.0

MAGIC = b"ELFR1\x00\x00\x00"
_HEADER = struct.Struct("<8sQQdddddQ")
assert _HEADER.size == 72


class RasterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridRaster:
    """North-up single-band raster.

    ``values[r, c]`` covers x in [origin_x + c*res_x, origin_x + (c+1)*res_x)
    and y in (origin_y - (r+1)*res_y, origin_y - r*res_y].
    """

    values: np.ndarray
    origin_x: float
    origin_y: float
    res_x: float
    res_y: float
    nodata: float = DEFAULT_NODATA
    crs: str | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] == 0 or vals.shape[1] == 0:
            raise RasterError("raster values must be a non-empty 2-D array")
        if not (self.res_x > 0 and self.res_y > 0):
            raise RasterError("raster resolution must be positive")
        bad = ~np.isfinite(vals) & (vals != self.nodata)
        if np.any(bad):
            raise RasterError("raster values must be finite or equal to nodata")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y)."""
        return (self.origin_x, self.origin_y - self.height * self.res_y,
                self.origin_x + self.width * self.res_x, self.origin_y)

    @property
    def valid(self) -> np.ndarray:
        return self.values != self.nodata

    def geotransform(self) -> tuple:
        return (self.origin_x, self.origin_y, self.res_x, self.res_y, self.width, self.height)

    def aligned_with(self, other: "GridRaster") -> bool:
        return self.geotransform() == other.geotransform()

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """x of every column center and y of every row center."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.res_x
        ys = self.origin_y - (np.arange(self.height) + 0.5) * self.res_y
        return xs, ys

    def with_values(self, values, nodata: float | None = None) -> "GridRaster":
        return GridRaster(values, self.origin_x, self.origin_y, self.res_x, self.res_y,
                          self.nodata if nodata is None else nodata, self.crs)

    def masked(self) -> np.ma.MaskedArray:
        return np.ma.masked_equal(self.values, self.nodata)


def write_elfr(path, raster: GridRaster) -> None:
    header = _HEADER.pack(MAGIC, raster.width, raster.height, raster.origin_x, raster.origin_y,
                          raster.res_x, raster.res_y, raster.nodata, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(raster.values, dtype="<f8").tobytes())


def read_elfr(path) -> GridRaster:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise RasterError(f"{path}: truncated header")
        magic, w, h, ox, oy, rx, ry, nodata, _ = _HEADER.unpack(head)
        if magic != MAGIC:
            raise RasterError(f"{path}: not an ELFR1 raster")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != w * h:
        raise RasterError(f"{path}: expected {w * h} values, found {data.size}")
    return GridRaster(data.reshape(h, w).astype(float), ox, oy, rx, ry, nodata)


def write_ascii_grid(path, raster: GridRaster) -> None:
    xll, yll = raster.bounds[0], raster.bounds[1]
    lines = [f"ncols {raster.width}", f"nrows {raster.height}",
             f"xllcorner {xll!r}", f"yllcorner {yll!r}"]
    if raster.res_x == raster.res_y:
        lines.append(f"cellsize {raster.res_x!r}")
    else:
        lines += [f"dx {raster.res_x!r}", f"dy {raster.res_y!r}"]
    lines.append(f"NODATA_value {raster.nodata!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for row in raster.values:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_ascii_grid(path) -> GridRaster:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if not rows and key in {"ncols", "nrows", "xllcorner", "yllcorner", "xllcenter",
                                    "yllcenter", "cellsize", "dx", "dy", "nodata_value"}:
                header[key] = float(parts[1])
            else:
                rows.append([float(v) for v in parts])
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    rx = header.get("dx", header.get("cellsize"))
    ry = header.get("dy", header.get("cellsize"))
    if rx is None or ry is None:
        raise RasterError(f"{path}: missing cell size")
    if "xllcorner" in header:
        xll, yll = header["xllcorner"], header["yllcorner"]
    else:
        xll, yll = header["xllcenter"] - rx / 2, header["yllcenter"] - ry / 2
    vals = np.array(rows, dtype=float)
    if vals.shape != (nrows, ncols):
        raise RasterError(f"{path}: expected {nrows}x{ncols} values, found {vals.shape}")
    nodata = header.get("nodata_value", DEFAULT_NODATA)
    return GridRaster(vals, xll, yll + nrows * ry, rx, ry, nodata)


def read_raster(path) -> GridRaster:
    """Read either format, chosen by content."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
    return read_elfr(path) if magic == MAGIC else read_ascii_grid(path)


def write_raster(path, raster: GridRaster) -> None:
    if str(path).lower().endswith((".asc", ".txt")):
        write_ascii_grid(path, raster)
    else:
        write_elfr(path, raster)
