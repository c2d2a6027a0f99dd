"""End-to-end run: derive -> segment -> search -> export.

A run is described by one ``key = value`` file (see ``DEFAULTS`` for every
key and its default). Search work is partitioned by landable polygon and
dispatched through a :class:`~elfkit.jobqueue.JobQueue` whose journal lives
in the output directory, so an interrupted run picks up where it stopped.
Each polygon's candidates are written to their own keyed file; the final
exports are rebuilt from those files once every polygon is acknowledged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading

import numpy as np

from . import derive, ensemble, export, geoio
from .config import ConfigError, parse_keyvalue
from .geometry import PointCloud
from .groundroll import AircraftConfig, Atmosphere
from .jobqueue import JobQueue
from .raster import GridRaster, read_raster, write_elfr
from .search import ANGLES_DEG, default_elf_length, default_elf_width, search_polygon

log = logging.getLogger(__name__)

DEFAULTS = {
    "input.dsm": "",
    "input.points": "",
    "input.resolution": "1.0",
    "input.nir": "",
    "input.red": "",
    "output.dir": "elfkit-out",
    "derive.idw_power": str(derive.IDW_POWER),
    "derive.idw_radius": str(derive.IDW_RADIUS),
    "derive.idw_max_points": str(derive.IDW_MAX_POINTS),
    "derive.hillshade_azimuth": "315",
    "derive.hillshade_altitude": "45",
    "segment.stages": "32:oracle,16:oracle,8:oracle",
    "segment.threshold": str(ensemble.DEFAULT_THRESHOLD),
    "segment.slope_threshold": str(ensemble.DEFAULT_SLOPE_THRESHOLD),
    "search.surface_factor": "1.15",
    "search.elf_length": "auto",
    "search.elf_width": "auto",
    "search.angle_step": "4",
    "search.slope_method": "max_abs",
    "pipeline.workers": "1",
}


class PipelineError(RuntimeError):
    """A pipeline step failed; the message names the module and operation."""


class PipelineInterrupted(PipelineError):
    pass


class _Step:
    def __init__(self, module: str, op: str):
        self.name = f"{module}/{op}"

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(f"{self.name}: {exc}") from exc
        return False


def parse_stages(text: str, slope: GridRaster | None, slope_threshold: float
                 ) -> list[ensemble.Stage]:
    """``sw:oracle``, ``sw:oracle@threshold`` or ``sw:file=path`` items, comma separated.

    An optional ``/stride`` after the window size overrides the half-window
    stride, e.g. ``32/8:oracle``.
    """
    stages = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        size, _, kind = item.partition(":")
        sw_text, _, stride_text = size.partition("/")
        try:
            sw = float(sw_text)
            stride = float(stride_text) if stride_text else None
        except ValueError:
            raise ConfigError(f"bad stage {item!r}") from None
        if kind.startswith("file="):
            clf = ensemble.FilePredictions(kind[5:])
        elif kind == "oracle" or kind.startswith("oracle@"):
            if slope is None:
                raise ConfigError("the slope oracle needs a DSM")
            t = float(kind[7:]) if "@" in kind else slope_threshold
            clf = ensemble.SlopeOracle(slope, t)
        else:
            raise ConfigError(f"unknown classifier {kind!r} in stage {item!r}")
        stages.append(ensemble.Stage(sw, clf, stride))
    if not stages:
        raise ConfigError("segment.stages is empty")
    return stages


def read_points(path) -> PointCloud:
    """Whitespace or comma separated ``x y z`` lines."""
    with open(path) as fh:
        text = fh.read().replace(",", " ")
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return PointCloud(np.array(rows, dtype=float).reshape(-1, 3))


def grid_to_rasters(grid: ensemble.PredictionGrid) -> dict[str, GridRaster]:
    """Prediction grid layers as north-up rasters."""
    ny, _ = grid.shape
    top = grid.origin_y + ny * grid.cell
    out = {}
    for name, arr in (("labels", grid.labels), ("confidence", grid.confidence),
                      ("stage", grid.stage)):
        out[name] = GridRaster(np.flipud(np.asarray(arr, dtype=float)), grid.origin_x, top,
                               grid.cell, grid.cell)
    return out


def _write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class Run:
    def __init__(self, values: dict[str, str], text: str):
        unknown = set(values) - set(DEFAULTS) - {k for k in values if k.startswith(
            ("aircraft.", "atmosphere."))}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        self.cfg = {**DEFAULTS, **values}
        self.key = hashlib.sha256(text.encode()).hexdigest()[:16]
        self.out = self.cfg["output.dir"]
        air = {k[9:]: float(v) for k, v in values.items() if k.startswith("aircraft.")}
        atm = {k[11:]: float(v) for k, v in values.items() if k.startswith("atmosphere.")}
        try:
            self.aircraft = AircraftConfig(**air)
            self.atm = Atmosphere(**atm)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def f(self, key: str) -> float:
        try:
            return float(self.cfg[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.cfg[key]!r}") from None

    def path(self, *parts) -> str:
        return os.path.join(self.out, *parts)


def _derive(run: Run) -> dict[str, GridRaster]:
    cfg = run.cfg
    layers = {}
    if cfg["input.dsm"]:
        with _Step("raster-derive", "read_raster"):
            layers["dsm"] = read_raster(cfg["input.dsm"])
    elif cfg["input.points"]:
        with _Step("raster-derive", "idw_interpolate"):
            cloud = read_points(cfg["input.points"])
            if len(cloud) == 0:
                raise PipelineError("raster-derive/idw_interpolate: point cloud is empty")
            lo, hi = cloud.xyz.min(axis=0), cloud.xyz.max(axis=0)
            spec = derive.GridSpec.covering(lo[0], lo[1], hi[0], hi[1], run.f("input.resolution"))
            layers["dsm"] = derive.idw_interpolate(
                cloud, spec, run.f("derive.idw_power"), run.f("derive.idw_radius"),
                int(run.f("derive.idw_max_points")))
    else:
        raise ConfigError("either input.dsm or input.points is required")
    dsm = layers["dsm"]
    with _Step("raster-derive", "slope"):
        layers["slope"] = derive.slope(dsm, "percent")
    with _Step("raster-derive", "roughness"):
        layers["roughness"] = derive.roughness(dsm)
    with _Step("raster-derive", "hillshade"):
        layers["hillshade"] = derive.hillshade(dsm, run.f("derive.hillshade_azimuth"),
                                               run.f("derive.hillshade_altitude"))
    if cfg["input.nir"] and cfg["input.red"]:
        with _Step("raster-derive", "ndvi"):
            layers["ndvi"] = derive.ndvi(read_raster(cfg["input.nir"]),
                                         read_raster(cfg["input.red"]))
    os.makedirs(run.path("derived"), exist_ok=True)
    for name, r in layers.items():
        write_elfr(run.path("derived", f"{name}.elfr"), r)
    return layers


def _segment(run: Run, layers) -> tuple[ensemble.PredictionGrid, list]:
    with _Step("segmentation-ensemble", "hierarchical_refine"):
        stages = parse_stages(run.cfg["segment.stages"], layers["slope"],
                              run.f("segment.slope_threshold"))
        grid = ensemble.hierarchical_refine(stages, layers["dsm"], run.f("segment.threshold"))
    with _Step("segmentation-ensemble", "mask_to_polygons"):
        polygons = ensemble.mask_to_polygons(grid)
    os.makedirs(run.path("segment"), exist_ok=True)
    for name, r in grid_to_rasters(grid).items():
        write_elfr(run.path("segment", f"{name}.elfr"), r)
    doc = geoio.feature_collection(
        [(p, {"id": i, "area": round(p.area, 6)}) for i, p in enumerate(polygons)], decimals=6)
    _write_text(run.path("landable.geojson"), json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return grid, polygons


def _search(run: Run, dsm: GridRaster, polygons, interrupt_after: int | None) -> list:
    length = (default_elf_length(run.aircraft, run.atm, run.f("search.surface_factor"))
              if run.cfg["search.elf_length"] == "auto" else run.f("search.elf_length"))
    width = (default_elf_width(run.aircraft) if run.cfg["search.elf_width"] == "auto"
             else run.f("search.elf_width"))
    step = int(run.f("search.angle_step"))
    angles = tuple(range(0, 180, step)) if step != 4 else ANGLES_DEG
    os.makedirs(run.path("search"), exist_ok=True)

    key_file = run.path("search", "run.key")
    if os.path.exists(key_file):
        with open(key_file) as fh:
            if fh.read().strip() != run.key:
                raise PipelineError(f"elf-search/resume: {run.out} holds a run with a different "
                                    "configuration; use a fresh output directory")
    else:
        _write_text(key_file, run.key + "\n")

    counter = {"n": 0}
    count_lock = threading.Lock()
    with JobQueue(run.path("search", "journal.log")) as q:
        if q.generation == 1:  # tasks not sealed yet: (re)enqueue the missing ones
            have = {t.payload for t in q.tasks()}
            for i in range(len(polygons)):
                if f"polygon:{i}" not in have:
                    q.enqueue(f"polygon:{i}")
            q.seal()
        if q.recovered_leases:
            log.info("resuming: %d interrupted polygons will be searched again",
                     q.recovered_leases)

        errors: list[BaseException] = []

        def worker(name: str) -> None:
            while not errors:
                task = q.lease(name)
                if task is None:
                    return
                i = int(task.payload.split(":")[1])
                try:
                    with _Step("elf-search", "search_polygon"):
                        recs = search_polygon(polygons[i], dsm, run.aircraft, run.atm,
                                              run.f("search.surface_factor"), length, width,
                                              angles, run.cfg["search.slope_method"])
                    _write_text(run.path("search", f"polygon_{i:05d}.json"),
                                json.dumps([export.record_to_dict(r) for r in recs]) + "\n")
                    with count_lock:
                        counter["n"] += 1
                        if interrupt_after is not None and counter["n"] >= interrupt_after:
                            raise PipelineInterrupted(
                                f"interrupted after {counter['n']} polygons")
                except BaseException as exc:  # leave the lease open, as a crash would
                    errors.append(exc)
                    return
                q.ack(name, task.id)

        n_workers = max(1, int(run.f("pipeline.workers")))
        threads = [threading.Thread(target=worker, args=(f"w{k}",)) for k in range(n_workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        if not q.drained():
            raise PipelineError("jobqueue/lease: search queue did not drain")

    records = []
    for i in range(len(polygons)):
        with open(run.path("search", f"polygon_{i:05d}.json")) as fh:
            records.extend(export.record_from_dict(d) for d in json.load(fh))
    return records


def _manifest(run: Run, grid, polygons, records, layers) -> str:
    lines = [f"run.key = {run.key}"]
    lines += [f"{k} = {v}" for k, v in sorted(run.cfg.items())]
    for f in AircraftConfig.__dataclass_fields__:
        lines.append(f"aircraft.{f} = {getattr(run.aircraft, f)!r}")
    for f in Atmosphere.__dataclass_fields__:
        lines.append(f"atmosphere.{f} = {getattr(run.atm, f)!r}")
    lines.append(f"derived.layers = {','.join(sorted(layers))}")
    for st in grid.meta["stages"]:
        k = st["stage"]
        lines.append(f"segment.stage{k}.sw = {st['sw']:g}")
        lines.append(f"segment.stage{k}.patches = {st['patches']}")
        lines.append(f"segment.stage{k}.area_m2 = {st['area']:.6f}")
    lines.append(f"segment.landable_area_m2 = {grid.landable_area():.6f}")
    lines.append(f"segment.polygons = {len(polygons)}")
    lines.append(f"search.candidates = {len(records)}")
    lines.append(f"search.accepted = {sum(r.accepted for r in records)}")
    return "\n".join(lines) + "\n"


def run_pipeline(config_path, interrupt_after: int | None = None) -> dict:
    """Run every step for the config file at ``config_path``.

    ``interrupt_after`` stops the search after that many polygons have been
    written but before their acknowledgement, leaving the journal as a crash
    would (used to exercise resumption). Returns a summary dict.
    """
    with open(config_path) as fh:
        text = fh.read()
    values = parse_keyvalue(text, str(config_path))
    run = Run(values, text)
    base = os.path.dirname(os.path.abspath(config_path))
    for key in ("input.dsm", "input.points", "input.nir", "input.red", "output.dir"):
        v = run.cfg[key]
        if v and not os.path.isabs(v):
            run.cfg[key] = os.path.join(base, v)
    run.out = run.cfg["output.dir"]
    os.makedirs(run.out, exist_ok=True)

    layers = _derive(run)
    grid, polygons = _segment(run, layers)
    records = _search(run, layers["dsm"], polygons, interrupt_after)
    with _Step("cli", "export"):
        export.write_all(run.path("elfs"), records)
        _write_text(run.path("manifest.txt"), _manifest(run, grid, polygons, records, layers))
    summary = {"polygons": len(polygons), "candidates": len(records),
               "accepted": sum(r.accepted for r in records),
               "landable_area": grid.landable_area(), "output": run.out}
    log.info("pipeline finished: %s", summary)
    return summary


def example_config(output_dir: str = "elfkit-out", dsm: str = "dsm.elfr") -> str:
    """A config file listing every key with its default."""
    vals = {**DEFAULTS, "input.dsm": dsm, "output.dir": output_dir}
    air = AircraftConfig()
    lines = ["# elfkit pipeline configuration"]
    lines += [f"{k} = {v}" for k, v in vals.items() if v]
    lines += [f"aircraft.{f} = {getattr(air, f)!r}" for f in AircraftConfig.__dataclass_fields__]
    return "\n".join(lines) + "\n"


__all__ = ["DEFAULTS", "PipelineError", "PipelineInterrupted", "run_pipeline",
           "parse_stages", "read_points", "example_config"]
