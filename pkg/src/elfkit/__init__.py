"""Emergency landing field toolkit.

Raster derivation from surface models, landing-distance physics, a
coarse-to-fine landability segmentation cascade, rectangular field search
with slope checks, training-sample generation and a durable work queue.
"""

from .geometry import GeoPolygon, OrientedRect, PointCloud, contains, rotate
from .groundroll import (AircraftConfig, Atmosphere, ground_roll_distance, required_length,
                         required_length_at_slope)
from .raster import GridRaster, read_raster, write_raster
from .search import ElfRecord, evaluate_elf, find_elfs, search_polygon

__version__ = "0.1.0"

__all__ = [
    "GeoPolygon", "OrientedRect", "PointCloud", "contains", "rotate",
    "AircraftConfig", "Atmosphere", "ground_roll_distance", "required_length",
    "required_length_at_slope", "GridRaster", "read_raster", "write_raster",
    "ElfRecord", "evaluate_elf", "find_elfs", "search_polygon",
]
