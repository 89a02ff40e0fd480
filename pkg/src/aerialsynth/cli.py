"""``aerialsynth`` command line.

Every subcommand reads an optional JSON config (``--config``); flags override
its keys.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import secrets
import sys
from pathlib import Path

from . import __version__
from .blueprint import load_blueprint_dir, prepare, stock_blueprint_dir
from .compose import (SOURCES, BackgroundPool, VehicleCropPool, compose_dataset, harvest_backgrounds,
                      harvest_vehicles)
from .errors import AerialSynthError, ConfigError, DataError
from .evaluation import average_precision, ground_truth_from_manifest, load_detections
from .experiments import GRIDS, build_grid, write_sweep
from .ingest import POTSDAM_CAR_MAP, ClassColorMap, convert_tile, load_exclusions
from .manifest import DatasetManifest, ImageRecord
from .raster import read_rgb, write_text_atomic
from .scene import GeneratorConfig, generate_dataset, run_parallel
from .tiler import TilingSpec, split, subsample, tile_dataset

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_IO = 0, 2, 3, 4
log = logging.getLogger("aerialsynth")


# --- config plumbing -------------------------------------------------------

def parse_seed(text):
    if text is None:
        return None
    if text == "auto":
        return secrets.randbits(64)
    try:
        v = int(text, 0)
    except ValueError:
        raise ConfigError(f"seed must be an integer or 'auto', not {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    return v


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return d


def merged(args, defaults: dict, overrides: dict) -> dict:
    """defaults < config file < flags; unknown config keys are an error."""
    cfg = load_config(args.config)
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    out = {**defaults, **cfg}
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def need_out(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required")
    return Path(args.out)


def existing(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} {p} does not exist")
    return p


def print_plan(plan: dict) -> int:
    print(json.dumps({"dry_run": True, **plan}, indent=1, sort_keys=True, default=str))
    return EXIT_OK


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- subcommands -----------------------------------------------------------

def cmd_prepare(args) -> int:
    c = merged(args, {"blueprint_dir": None, "gsd": 0.10, "min_region_px": 0},
               {"blueprint_dir": args.blueprints, "gsd": args.gsd, "min_region_px": args.min_region_px})
    d = existing(c["blueprint_dir"] or stock_blueprint_dir(), "blueprint directory")
    if args.dry_run:
        return print_plan({"blueprint_dir": d, "files": len(list(d.glob("*.png"))), "gsd": c["gsd"]})
    src = load_blueprint_dir(d)
    done = prepare(src, float(c["gsd"]), int(c["min_region_px"]))
    report = []
    for a, b in zip(src, done):
        report.append({"id": a.id, "vehicle_label": a.vehicle_label, "source_px": list(a.shape),
                       "prepared_px": list(b.shape), "histogram": b.histogram()})
        print(f"{a.id:16s} {a.shape[1]}x{a.shape[0]} -> {b.shape[1]}x{b.shape[0]} px  "
              + " ".join(f"{k}={v}" for k, v in b.histogram().items()))
    if args.out:
        write_text_atomic(Path(args.out) / "prepare_report.json",
                          json.dumps({"gsd": c["gsd"], "blueprints": report}, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _generator_config(args, extra_keys: dict) -> tuple[GeneratorConfig, dict]:
    defaults = {**GeneratorConfig().to_dict(), **extra_keys}
    flags = {"seed": args.seed, "image_count": args.images}
    c = merged(args, defaults, {**flags, **{k: getattr(args, k, None) for k in extra_keys}})
    gen = GeneratorConfig.from_dict({k: c[k] for k in GeneratorConfig().to_dict()})
    return gen, {k: c[k] for k in extra_keys}


def cmd_generate(args) -> int:
    cfg, _ = _generator_config(args, {})
    out = need_out(args)
    if args.dry_run:
        return print_plan({"images": cfg.image_count, "out": out, "seed": cfg.seed, "workers": args.workers,
                           "config": cfg.to_dict()})
    m = generate_dataset(cfg, out, args.workers)
    print(f"{len(m)} images, {m.annotation_count} vehicles -> {out / 'manifest.json'} "
          f"(sha256 {sha256(out / 'manifest.json')[:16]})")
    return EXIT_OK


_SUFFIX = re.compile(r"[_-]?(rgb|label|labels|irrg)$", re.IGNORECASE)


def pair_rasters(rgb_dir: Path, label_dir: Path) -> list[tuple[str, Path, Path]]:
    """Match image and label rasters by file stem minus an ``_RGB``/``_label`` suffix."""
    exts = {".png", ".tif", ".tiff"}

    def index(d):
        return {_SUFFIX.sub("", p.stem): p for p in sorted(d.iterdir()) if p.suffix.lower() in exts}

    rgb, lab = index(rgb_dir), index(label_dir)
    missing = sorted(set(rgb) ^ set(lab))
    if missing:
        raise DataError(f"unpaired rasters: {missing}")
    return [(k, rgb[k], lab[k]) for k in sorted(rgb)]


def _ingest_one(job):
    tile_id, rgb_path, label_path, out_dir, cmap, min_area, excl, gsd = job
    s = convert_tile(read_rgb(rgb_path), read_rgb(label_path), ClassColorMap.from_dict(cmap), min_area, excl,
                     tile_id, gsd)
    h, w = s.pixels.shape[:2]
    return ImageRecord(tile_id, os.path.relpath(rgb_path, out_dir), w, h, gsd, None, s.annotations,
                       None, {"label_file": os.path.relpath(label_path, out_dir)}).to_dict()


def cmd_ingest(args) -> int:
    c = merged(args, {"rgb_dir": None, "label_dir": None, "class_map": None, "exclusions": None,
                      "min_area_px": 0, "gsd": 0.05},
               {"rgb_dir": args.rgb_dir, "label_dir": args.label_dir, "class_map": args.class_map,
                "exclusions": args.exclusions, "min_area_px": args.min_area, "gsd": args.gsd})
    rgb_dir, label_dir = existing(c["rgb_dir"], "--rgb-dir"), existing(c["label_dir"], "--label-dir")
    out = need_out(args)
    cmap = POTSDAM_CAR_MAP if c["class_map"] is None else ClassColorMap.from_dict(load_config(c["class_map"]))
    excl = load_exclusions(c["exclusions"])
    pairs = pair_rasters(rgb_dir, label_dir)
    if args.dry_run:
        return print_plan({"tiles": [p[0] for p in pairs], "out": out, "class_map": cmap.to_dict(),
                           "exclusions": excl})
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(k, r, lab, str(out.resolve()), cmap.to_dict(), int(c["min_area_px"]), excl.get(k, []),
             float(c["gsd"])) for k, r, lab in pairs]
    records = [ImageRecord.from_dict(d) for d in run_parallel(_ingest_one, jobs, args.workers)]
    config = {**c, "class_map": cmap.to_dict(), "exclusions": excl}
    m = DatasetManifest(config, records, {"kind": "ingested", "seed": args.seed}, out)
    m.save(out / "manifest.json")
    print(f"{len(records)} tiles, {m.annotation_count} vehicles -> {out / 'manifest.json'}")
    return EXIT_OK


def _sizes(text) -> list:
    if text is None or text == "":
        return []
    items = text if isinstance(text, list) else str(text).split(",")
    out = []
    for s in items:
        s = str(s).strip()
        out.append("all" if s == "all" else int(s))
    return out


def cmd_tile(args) -> int:
    defaults = {"manifest": None, **TilingSpec().to_dict(), "val_fraction": 0.0, "subsample": [], "seed": 0}
    c = merged(args, defaults,
               {"manifest": args.manifest, "patch_px": args.patch, "overlap_px": args.overlap,
                "output_px": args.output_px, "min_annotation_px": args.min_annotation,
                "drop_empty": False if args.keep_empty else None, "val_fraction": args.val_fraction,
                "subsample": args.subsample, "seed": args.seed})
    src = existing(c["manifest"], "--manifest")
    spec = TilingSpec.from_dict({k: c[k] for k in TilingSpec().to_dict()})
    sizes = _sizes(c["subsample"])
    out = need_out(args)
    if args.dry_run:
        m = DatasetManifest.load(src)
        return print_plan({"source_images": len(m), "tiling": spec.to_dict(), "out": out, "seed": c["seed"],
                           "val_fraction": c["val_fraction"], "subsample": sizes})
    m = tile_dataset(src, spec, out, args.workers)
    print(f"{len(m)} patches, {m.annotation_count} vehicles -> {out / 'manifest.json'}")
    if c["val_fraction"] or sizes:
        train, val = split(m, float(c["val_fraction"]), int(c["seed"]))
        train.save(out / "train.json")
        val.save(out / "val.json")
        print(f"split: {len(train)} train / {len(val)} val")
        for n in sizes:
            sub = train if n == "all" else subsample(train, n, int(c["seed"]))
            sub.save(out / f"train_{n}.json")
    return EXIT_OK


def _load_pool(path, kind: str):
    if path is None:
        raise ConfigError(f"real {kind} requested but no --{kind[:-1]}-pool given")
    p = existing(path, f"{kind} pool")
    doc = json.loads(p.read_text())
    if doc.get("kind") == "background":
        return BackgroundPool.load_index(p)
    if doc.get("kind") == "vehicle":
        return VehicleCropPool.load_index(p)
    m = DatasetManifest.load(p)
    return harvest_backgrounds(m, p) if kind == "backgrounds" else harvest_vehicles(m, p)


def cmd_compose(args) -> int:
    extra = {"vehicles": "artificial", "backgrounds": "artificial", "vehicle_pool": None,
             "background_pool": None, "all_four": False}
    cfg, c = _generator_config(args, extra)
    out = need_out(args)
    combos = ([(v, b) for v in SOURCES for b in SOURCES] if c["all_four"]
              else [(c["vehicles"], c["backgrounds"])])
    for v, b in combos:
        if v not in SOURCES or b not in SOURCES:
            raise ConfigError(f"sources must be one of {SOURCES}")
    uses_real_v = any(v == "real" for v, _ in combos)
    uses_real_b = any(b == "real" for _, b in combos)
    if args.dry_run:
        return print_plan({"combinations": combos, "images": cfg.image_count, "seed": cfg.seed, "out": out,
                           "vehicle_pool": c["vehicle_pool"], "background_pool": c["background_pool"]})
    vehicles = _load_pool(c["vehicle_pool"], "vehicles") if uses_real_v else None
    backgrounds = _load_pool(c["background_pool"], "backgrounds") if uses_real_b else None
    for v, b in combos:
        target = out / f"{v}_vehicles_{b}_background" if c["all_four"] else out
        m = compose_dataset(v, b, cfg, target, vehicles, backgrounds, args.workers)
        print(f"{v} vehicles / {b} background: {len(m)} images, {m.annotation_count} vehicles -> {target}")
    if vehicles is not None:
        vehicles.save(out / "vehicle_pool.json")
    if backgrounds is not None:
        backgrounds.save(out / "background_pool.json")
    return EXIT_OK


def cmd_eval(args) -> int:
    c = merged(args, {"detections": None, "manifest": None, "iou_threshold": 0.5, "confidence_floor": 0.1},
               {"detections": args.detections, "manifest": args.manifest, "iou_threshold": args.iou,
                "confidence_floor": args.floor})
    det_path, man_path = existing(c["detections"], "--detections"), existing(c["manifest"], "--manifest")
    if args.dry_run:
        return print_plan({"detections": det_path, "manifest": man_path, "iou_threshold": c["iou_threshold"],
                           "confidence_floor": c["confidence_floor"], "out": args.out})
    res = average_precision(load_detections(det_path), ground_truth_from_manifest(DatasetManifest.load(man_path)),
                            float(c["iou_threshold"]), float(c["confidence_floor"]))
    doc = {"iou_threshold": c["iou_threshold"], "confidence_floor": c["confidence_floor"], **res.to_dict()}
    if args.out:
        write_text_atomic(Path(args.out) / "ap.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"AP@{c['iou_threshold']}: {res.ap:.6f}  (tp {res.tp}, fp {res.fp}, fn {res.fn})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    c = merged(args, {"grid": None, "seed": 0}, {"grid": args.grid, "seed": args.seed})
    if not c["grid"]:
        raise ConfigError("--grid is required")
    names = c["grid"] if isinstance(c["grid"], list) else str(c["grid"]).split(",")
    names = list(GRIDS) if names == ["all"] else names
    recipes = [r for n in names for r in build_grid(n, int(c["seed"]))]
    out = need_out(args)
    if args.dry_run:
        return print_plan({"grids": names, "recipes": [r["label"] for r in recipes], "out": out, "seed": c["seed"]})
    write_sweep(names, out, int(c["seed"]))
    print(f"{len(recipes)} recipes -> {out}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", help="64-bit seed or 'auto'")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aerialsynth", description="Artificial aerial vehicle datasets.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="validate and rescale a blueprint set")
    _common(p)
    p.add_argument("--blueprints", help="blueprint directory (default: bundled set)")
    p.add_argument("--gsd", type=float)
    p.add_argument("--min-region-px", type=int)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("generate", help="render an artificial dataset")
    _common(p)
    p.add_argument("--images", type=int, help="number of images")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="semantic label rasters to box annotations")
    _common(p)
    p.add_argument("--rgb-dir")
    p.add_argument("--label-dir")
    p.add_argument("--class-map", help="JSON class colour map (default: Potsdam car)")
    p.add_argument("--exclusions", help="JSON {tile_id: [region id or {x, y}]}")
    p.add_argument("--min-area", type=int)
    p.add_argument("--gsd", type=float)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tile", help="cut, resample, split and subsample")
    _common(p)
    p.add_argument("--manifest")
    p.add_argument("--patch", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--output-px", type=int)
    p.add_argument("--min-annotation", type=float)
    p.add_argument("--keep-empty", action="store_true", help="keep patches without vehicles")
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--subsample", help="comma list of train subset sizes, 'all' for the full split")
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("compose", help="mix real and artificial vehicles/backgrounds")
    _common(p)
    p.add_argument("--images", type=int)
    p.add_argument("--vehicles", choices=SOURCES)
    p.add_argument("--backgrounds", choices=SOURCES)
    p.add_argument("--vehicle-pool", help="annotated manifest or vehicle pool index")
    p.add_argument("--background-pool", help="manifest with empty patches or background pool index")
    p.add_argument("--all-four", action="store_true", default=None, help="build every combination")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("eval", help="AP@IoU of detections against a manifest")
    _common(p)
    p.add_argument("--detections")
    p.add_argument("--manifest")
    p.add_argument("--iou", type=float)
    p.add_argument("--floor", type=float, help="confidence floor")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="write experiment recipes and a results skeleton")
    _common(p)
    p.add_argument("--grid", help=f"comma list of {', '.join(GRIDS)} or 'all'")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.seed = parse_seed(args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AerialSynthError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
