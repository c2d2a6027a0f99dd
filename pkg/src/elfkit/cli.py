"""Command line entry point ``elfkit``.

Subcommands: derive, segment, search, groll, dataset, pipeline. Every
failure exits with status 1 and a one-line diagnostic of the form
``elfkit: <module>/<operation>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import dataset, derive, ensemble, export, geoio, groundroll, search
from .config import ConfigError
from .pipeline import PipelineError
from .raster import read_raster, write_raster

log = logging.getLogger("elfkit")

_MODULES = {
    "elfkit.geometry": "geo-core", "elfkit.geoio": "geo-core", "elfkit.raster": "raster-derive",
    "elfkit.derive": "raster-derive", "elfkit.groundroll": "ground-roll",
    "elfkit.ensemble": "segmentation-ensemble", "elfkit.search": "elf-search",
    "elfkit.dataset": "dataset-gen", "elfkit.jobqueue": "jobqueue", "elfkit.config": "cli",
    "elfkit.pipeline": "cli",
}


class CommandError(RuntimeError):
    def __init__(self, module: str, op: str, message: str):
        super().__init__(f"{module}/{op}: {message}")


def _fail(module: str, op: str):
    """Context manager turning any error into a CommandError naming ``module/op``."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, kind, exc, tb):
            if exc is None or isinstance(exc, (CommandError, PipelineError, SystemExit)):
                return False
            mod = _MODULES.get(type(exc).__module__, module)
            raise CommandError(mod, op, str(exc) or type(exc).__name__) from exc

    return _Ctx()


# derive -----------------------------------------------------------------

def cmd_derive(args) -> int:
    op = args.op
    with _fail("raster-derive", op):
        if op == "idw":
            from .pipeline import read_points

            cloud = read_points(args.input)
            lo, hi = cloud.xyz.min(axis=0), cloud.xyz.max(axis=0)
            spec = derive.GridSpec.covering(lo[0], lo[1], hi[0], hi[1], args.resolution)
            out = derive.idw_interpolate(cloud, spec, args.power, args.radius, args.max_points)
        elif op == "ndvi":
            if not args.red:
                raise ValueError("ndvi needs --red")
            out = derive.ndvi(read_raster(args.input), read_raster(args.red))
        else:
            src = read_raster(args.input)
            if op == "slope":
                out = derive.slope(src, args.units)
            elif op == "roughness":
                out = derive.roughness(src)
            elif op == "hillshade":
                out = derive.hillshade(src, args.azimuth, args.altitude)
            else:  # resample
                out = derive.bilinear_resample(src, args.resolution)
        write_raster(args.output, out)
    print(f"{op}: wrote {args.output} ({out.width}x{out.height})")
    return 0


# segment ----------------------------------------------------------------

def cmd_segment(args) -> int:
    from .pipeline import grid_to_rasters, parse_stages

    with _fail("segmentation-ensemble", "hierarchical_refine"):
        slope = None
        if args.slope:
            slope = read_raster(args.slope)
        elif args.dsm:
            slope = derive.slope(read_raster(args.dsm), "percent")
        if args.area:
            area = tuple(float(v) for v in args.area.split(","))
        elif slope is not None:
            area = slope
        else:
            raise ValueError("give --area when no DSM or slope raster is used")
        stages = parse_stages(args.stages, slope, args.slope_threshold)
        grid = ensemble.hierarchical_refine(stages, area, args.threshold)
        polygons = ensemble.mask_to_polygons(grid)
    os.makedirs(args.out, exist_ok=True)
    with _fail("segmentation-ensemble", "write"):
        for name, r in grid_to_rasters(grid).items():
            write_raster(os.path.join(args.out, f"{name}.elfr"), r)
        doc = geoio.feature_collection(
            [(p, {"id": i, "area": round(p.area, 6)}) for i, p in enumerate(polygons)], 6)
        with open(os.path.join(args.out, "landable.geojson"), "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    for st in grid.meta["stages"]:
        print(f"stage {st['stage']} sw={st['sw']:g}: {st['patches']} patches, "
              f"{st['area']:.1f} m2 examined")
    print(f"landable: {grid.landable_area():.1f} m2 in {len(polygons)} polygons")
    return 0


# search -----------------------------------------------------------------

def _aircraft(path):
    if path:
        return groundroll.load_config(path)
    return groundroll.AircraftConfig(), groundroll.Atmosphere()


def cmd_search(args) -> int:
    with _fail("elf-search", "search_polygon"):
        air, atm = _aircraft(args.aircraft)
        dsm = read_raster(args.dsm)
        polys = [p for p, _ in geoio.read_features(args.polygons)]
        records = []
        for poly in polys:
            records += search.search_polygon(poly, dsm, air, atm, args.surface_factor,
                                             args.elf_length, args.elf_width,
                                             slope_method=args.slope_method)
    with _fail("elf-search", "export"):
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        export.write_all(args.out, records)
    print(f"{len(records)} candidates, {sum(r.accepted for r in records)} accepted; "
          f"wrote {args.out}.geojson/.csv/.sql")
    return 0


# groll ------------------------------------------------------------------

def cmd_groll(args) -> int:
    with _fail("ground-roll", "ground_roll_distance"):
        air, atm = _aircraft(args.aircraft)
        alpha = groundroll.slope_angle(args.slope)
        s_g = groundroll.ground_roll_distance(air, atm, alpha)
        req = groundroll.required_length(s_g, args.surface_factor, args.slope)
    print(f"ground roll: {s_g:.3f} m")
    print(f"required length (x{args.surface_factor:g}): {req:.3f} m")
    return 0


# dataset ----------------------------------------------------------------

def _layer_names(spec: str | None, paths: dict) -> list[str]:
    """``rgb,slope`` -> R, G, B, SLOPE; default: every --raster given."""
    if not spec:
        if not paths:
            raise ValueError("no layers: give --layers or --raster NAME=PATH")
        return list(paths)
    names = []
    for item in spec.split(","):
        item = item.strip().upper()
        parts = list(item) if item == "RGB" else [item]
        for name in parts:
            if name not in dataset.LAYER_NAMES:
                raise ValueError(f"unknown layer {name!r}; expected one of "
                                 f"{', '.join(dataset.LAYER_NAMES)} or rgb")
            names.append(name)
    return names


def _layer_path(name: str, paths: dict, directory: str) -> str:
    if name in paths:
        return paths[name]
    for ext in (".elfr", ".asc"):
        path = os.path.join(directory, name.lower() + ext)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"no raster for layer {name}: pass --raster {name}=PATH or put "
                            f"{name.lower()}.elfr in {directory}")


def cmd_dataset(args) -> int:
    with _fail("dataset-gen", "extract_samples"):
        labels = dataset.read_label_polygons(args.labels)
        paths = {}
        for item in args.raster:
            name, _, path = item.partition("=")
            if not path:
                raise ValueError(f"--raster expects NAME=PATH, got {item!r}")
            paths[name.upper()] = path
        layers = {name: read_raster(_layer_path(name, paths, args.layer_dir))
                  for name in _layer_names(args.layers, paths)}
        samples = dataset.extract_samples(labels, layers, args.sw)
        if "SLOPE" in samples.layers:
            report = dataset.verify_landable(samples, "SLOPE", args.max_slope, args.verify)
            samples = report.samples
            if report.flagged:
                print(f"{len(report.flagged)} landable samples exceed {args.max_slope:g}% slope "
                      f"({args.verify})")
        train, test = dataset.balance_split(samples, args.train_fraction, args.seed)
        norm = dataset.compute_normalization([train, test])
        train.norm = test.norm = norm
        dataset.write_samples(args.out, [train, test], args.seed)
    print(f"train {len(train)} / test {len(test)} samples of {args.sw:g} m "
          f"({samples.skipped} windows skipped); wrote {args.out}")
    return 0


# pipeline ---------------------------------------------------------------

def cmd_pipeline(args) -> int:
    from .pipeline import example_config, run_pipeline

    if args.print_config:
        print(example_config(), end="")
        return 0
    if not args.config:
        raise CommandError("cli", "run_pipeline", "a config file is required")
    with _fail("cli", "run_pipeline"):
        summary = run_pipeline(args.config)
    print(f"{summary['polygons']} landable polygons ({summary['landable_area']:.1f} m2), "
          f"{summary['candidates']} ELF candidates, {summary['accepted']} accepted; "
          f"outputs in {summary['output']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    air = groundroll.AircraftConfig()
    p = argparse.ArgumentParser(prog="elfkit", formatter_class=fmt,
                                description="Emergency landing field analysis toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive", formatter_class=fmt, help="derive raster layers")
    d.add_argument("--op", required=True,
                   choices=["idw", "slope", "roughness", "hillshade", "ndvi", "resample"],
                   help="layer to derive")
    d.add_argument("input", help="input raster (.elfr/.asc), or x y z text file for idw; "
                                 "NIR raster for ndvi")
    d.add_argument("output", help="output raster (.elfr or .asc)")
    d.add_argument("--red", help="red band raster (ndvi)")
    d.add_argument("--units", choices=["percent", "degrees"], default="percent",
                   help="slope units")
    d.add_argument("--azimuth", type=float, default=315.0, help="hillshade sun azimuth (deg)")
    d.add_argument("--altitude", type=float, default=45.0, help="hillshade sun altitude (deg)")
    d.add_argument("--resolution", type=float, default=1.0, help="output cell size (m)")
    d.add_argument("--power", type=float, default=derive.IDW_POWER, help="IDW power")
    d.add_argument("--radius", type=float, default=derive.IDW_RADIUS, help="IDW radius (m)")
    d.add_argument("--max-points", type=int, default=derive.IDW_MAX_POINTS,
                   help="IDW nearest-neighbour count")
    d.set_defaults(func=cmd_derive)

    s = sub.add_parser("segment", formatter_class=fmt, help="hierarchical landability map")
    s.add_argument("--dsm", help="DSM raster (slope derived for the slope oracle)")
    s.add_argument("--slope", help="slope raster in percent (overrides --dsm)")
    s.add_argument("--area", help="min_x,min_y,max_x,max_y (default: raster bounds)")
    s.add_argument("--stages", default="32:oracle,16:oracle,8:oracle",
                   help="coarse to fine stages: SW[/STRIDE]:oracle[@PCT] or SW:file=PATH")
    s.add_argument("--threshold", type=float, default=ensemble.DEFAULT_THRESHOLD,
                   help="mean confidence below which cells are refined")
    s.add_argument("--slope-threshold", type=float, default=ensemble.DEFAULT_SLOPE_THRESHOLD,
                   help="slope oracle limit (%%)")
    s.add_argument("--out", default="segment-out", help="output directory")
    s.set_defaults(func=cmd_segment)

    f = sub.add_parser("search", formatter_class=fmt, help="find and check landing fields")
    f.add_argument("--polygons", required=True, help="landable polygons (GeoJSON)")
    f.add_argument("--dsm", required=True, help="DSM raster")
    f.add_argument("--aircraft", help="aircraft key=value config (default: DA20)")
    f.add_argument("--surface-factor", type=float, default=groundroll.GRASS_FIRM,
                   help="runway length factor (1.15 grass, 1.6 wet short grass)")
    f.add_argument("--elf-length", type=float, default=None,
                   help="search length (m); default: required length at "
                        f"{search.SEARCH_UPHILL_PCT}%% uphill")
    f.add_argument("--elf-width", type=float, default=None,
                   help=f"search width (m); default: {search.WIDTH_FACTOR:g} x wing span")
    f.add_argument("--slope-method", choices=search.SLOPE_METHODS, default="max_abs",
                   help="profile slope estimate")
    f.add_argument("--out", default="elfs", help="output prefix for .geojson/.csv/.sql")
    f.set_defaults(func=cmd_search)

    g = sub.add_parser("groll", formatter_class=fmt, help="ground roll calculator")
    g.add_argument("--aircraft", help=f"aircraft key=value config (default: DA20, "
                                      f"{air.mass:g} kg, {air.wing_span} m span)")
    g.add_argument("--slope", "--alpha-pct", type=float, default=0.0,
                   help="field slope (%%, uphill positive)")
    g.add_argument("--surface-factor", type=float, default=groundroll.GRASS_FIRM,
                   help="runway length factor")
    g.set_defaults(func=cmd_groll)

    t = sub.add_parser("dataset", formatter_class=fmt, help="build training samples")
    t.add_argument("--labels", required=True, help="labelled squares (GeoJSON, 'label' 0/1)")
    t.add_argument("--raster", action="append", default=[], metavar="NAME=PATH",
                   help=f"layer raster, repeatable; names from {', '.join(dataset.LAYER_NAMES)}")
    t.add_argument("--layers", help="comma-separated layers, 'rgb' expands to R,G,B "
                                    "(default: every --raster)")
    t.add_argument("--layer-dir", default=".",
                   help="directory searched for <layer>.elfr/.asc when no --raster is given")
    t.add_argument("--sw", type=float, default=16.0, help="search window (m)")
    t.add_argument("--max-slope", type=float, default=10.0,
                   help="steepest slope allowed in landable samples (%%)")
    t.add_argument("--verify", choices=["flag", "relabel", "drop"], default="flag",
                   help="what to do with steep landable samples")
    t.add_argument("--train-fraction", type=float, default=0.8, help="train share per class")
    t.add_argument("--seed", type=int, default=0, help="random seed")
    t.add_argument("--out", default="samples", help="output directory")
    t.set_defaults(func=cmd_dataset)

    r = sub.add_parser("pipeline", formatter_class=fmt, help="run every step from a config")
    r.add_argument("config", nargs="?", help="key=value config file")
    r.add_argument("--print-config", action="store_true",
                   help="print a config with every key and its default")
    r.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CommandError, ConfigError, PipelineError) as exc:
        print(f"elfkit: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"elfkit: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

