"""Declarative experiment grids: each recipe names its training sets and the
CLI calls that build them.  Nothing here trains a detector; the results
table is an empty skeleton to be filled by an external training run.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import ConfigError
from .raster import write_text_atomic
from .scene import GeneratorConfig
from .tiler import TilingSpec

REAL_SIZES = (8, 16, 32, 64, 100, 150, 200, 300, 500, 750, 1000, "all")
ARTIFICIAL_IMAGES = 1000
VAL_FRACTION = 0.3
INGESTED = "{ingested}"  # placeholder for the ingested orthomosaic manifest

# border, partial, deform %, fine noise, rough noise variance
ABLATION_ROWS = (
    ("body", False, 0, False, 0),
    ("black", False, 0, False, 0),
    ("black", True, 0, False, 0),
    ("black", True, 5, False, 0),
    ("black", True, 10, False, 0),
    ("black", True, 20, False, 0),
    ("black", True, 5, True, 0),
    ("black", True, 5, True, 5),
    ("black", True, 5, True, 10),
    ("black", True, 5, True, 15),
    ("black", True, 5, True, 20),
)

COMPOSITION_ROWS = (
    ("artificial", "artificial"),
    ("real", "artificial"),
    ("artificial", "real"),
    ("real", "real"),
)

# GSD, source patch size; the overlap keeps the 1/3 ratio of the default tiling
GSD_ROWS = ((0.05, 300), (0.10, 600), (0.15, 900), (0.20, 1200))
GSD_TRAIN_SETS = (("all", 0), (8, 0), (8, ARTIFICIAL_IMAGES), (150, 0), (150, ARTIFICIAL_IMAGES))

GRIDS = ("fig7", "table3", "table4", "table2")


def _size_tag(n) -> str:
    return "all" if n == "all" else f"{n:04d}"


def _tile_cmd(out: str, seed: int, sizes, spec: TilingSpec = TilingSpec(), keep_empty: bool = False):
    cmd = ["aerialsynth", "tile", "--manifest", INGESTED, "--out", out, "--seed", str(seed),
           "--patch", str(spec.patch_px), "--overlap", str(spec.overlap_px),
           "--output-px", str(spec.output_px), "--val-fraction", str(VAL_FRACTION),
           "--subsample", ",".join(str(s) for s in sizes)]
    if keep_empty:
        cmd.append("--keep-empty")
    return cmd


def _generate_cmd(config_file: str, out: str):
    return ["aerialsynth", "generate", "--config", config_file, "--out", out]


def fig7_grid(seed: int = 0) -> list[dict]:
    art_cfg = GeneratorConfig(seed=seed, image_count=ARTIFICIAL_IMAGES).to_dict()
    recipes = []
    for n_art in (0, ARTIFICIAL_IMAGES):
        for n in REAL_SIZES:
            label = f"fig7_r{_size_tag(n)}_a{n_art:04d}"
            train = [f"real/train_{n}.json"]
            cmds = [_tile_cmd("real", seed, REAL_SIZES)]
            gen = None
            if n_art:
                gen = art_cfg
                train.append("artificial/manifest.json")
                cmds.append(_generate_cmd("configs/fig7_artificial.json", "artificial"))
            recipes.append({"label": label, "grid": "fig7", "real_images": n, "artificial_images": n_art,
                            "generator": gen, "train_sets": train, "commands": cmds})
    return recipes


def table3_grid(seed: int = 0) -> list[dict]:
    recipes = []
    for k, (border, partial, deform, fine, rough) in enumerate(ABLATION_ROWS):
        cfg = GeneratorConfig(seed=seed, image_count=ARTIFICIAL_IMAGES, outline_mode=border,
                              enable_cut=partial, enable_deform=deform > 0,
                              deform_max=deform / 100.0 if deform else 0.05,
                              enable_fine_noise=fine, enable_rough_noise=rough > 0,
                              rough_noise_var=float(rough or 10))
        label = f"table3_row{k + 1:02d}"
        recipes.append({"label": label, "grid": "table3", "real_images": 0,
                        "artificial_images": ARTIFICIAL_IMAGES,
                        "row": {"border": border, "partial": partial, "deform_pct": deform,
                                "fine_noise": fine, "rough_noise_var": rough},
                        "generator": cfg.to_dict(), "train_sets": [f"{label}/manifest.json"],
                        "commands": [_generate_cmd(f"configs/{label}.json", label)]})
    return recipes


def table4_grid(seed: int = 0) -> list[dict]:
    cfg = GeneratorConfig(seed=seed, image_count=ARTIFICIAL_IMAGES).to_dict()
    tile = _tile_cmd("real_with_empty", seed, ("all",), keep_empty=True)
    pool = "real_with_empty/train.json"
    recipes = []
    for vs, bs in COMPOSITION_ROWS:
        label = f"table4_{vs}_vehicles_{bs}_background"
        cmd = ["aerialsynth", "compose", "--config", "configs/table4.json", "--out", label,
               "--vehicles", vs, "--backgrounds", bs]
        if vs == "real":
            cmd += ["--vehicle-pool", pool]
        if bs == "real":
            cmd += ["--background-pool", pool]
        recipes.append({"label": label, "grid": "table4", "vehicles": vs, "background": bs,
                        "real_images": 0, "artificial_images": ARTIFICIAL_IMAGES, "generator": cfg,
                        "train_sets": [f"{label}/manifest.json"],
                        "commands": ([tile] if "real" in (vs, bs) else []) + [cmd]})
    recipes.append({"label": "table4_real_reference", "grid": "table4", "vehicles": "real",
                    "background": "real (matching)", "real_images": "all", "artificial_images": 0,
                    "generator": None, "train_sets": ["real/train_all.json"],
                    "commands": [_tile_cmd("real", seed, ("all",))]})
    return recipes


def table2_grid(seed: int = 0) -> list[dict]:
    recipes = []
    for gsd, patch in GSD_ROWS:
        spec = TilingSpec(patch_px=patch, overlap_px=patch // 3, output_px=300)
        cfg = GeneratorConfig(seed=seed, image_count=ARTIFICIAL_IMAGES, canvas_px=300, gsd=gsd)
        tag = f"gsd{int(round(gsd * 100)):03d}"
        sets = []
        for n, n_art in GSD_TRAIN_SETS:
            s = [f"{tag}/real/train_{n}.json"]
            if n_art:
                s.append(f"{tag}/artificial/manifest.json")
            sets.append({"real_images": n, "artificial_images": n_art, "train_sets": s})
        recipes.append({"label": f"table2_{tag}", "grid": "table2", "gsd": gsd, "patch_px": patch,
                        "tiling": spec.to_dict(), "generator": cfg.to_dict(), "datasets": sets,
                        "commands": [_tile_cmd(f"{tag}/real", seed, (8, 150, "all"), spec),
                                     _generate_cmd(f"configs/{tag}.json", f"{tag}/artificial")]})
    return recipes


_BUILDERS = {"fig7": fig7_grid, "table3": table3_grid, "table4": table4_grid, "table2": table2_grid}


def build_grid(name: str, seed: int = 0) -> list[dict]:
    if name not in _BUILDERS:
        raise ConfigError(f"unknown grid {name!r}; choose from {', '.join(GRIDS)}")
    recipes = _BUILDERS[name](seed)
    labels = [r["label"] for r in recipes]
    assert len(set(labels)) == len(labels), "recipe labels must be unique"
    return recipes


def _config_files(recipes) -> dict[str, dict]:
    """Generator config files referenced by the recipes' commands."""
    out = {}
    for r in recipes:
        for cmd in r["commands"]:
            if "--config" in cmd:
                name = cmd[cmd.index("--config") + 1]
                out[name] = r["generator"]
    return out


RESULT_COLUMNS = ("label", "grid", "real_images", "artificial_images", "ap_mean", "ap_std", "runs")


def results_skeleton(recipes) -> list[dict]:
    rows = []
    for r in recipes:
        for d in r.get("datasets", [r]):
            label = r["label"] if d is r else f"{r['label']}_r{d['real_images']}_a{d['artificial_images']}"
            rows.append({"label": label, "grid": r["grid"], "real_images": d["real_images"],
                         "artificial_images": d["artificial_images"], "ap_mean": None, "ap_std": None,
                         "runs": 0})
    return rows


def write_sweep(names, out_dir, seed: int = 0) -> dict:
    out_dir = Path(out_dir)
    recipes = [r for n in names for r in build_grid(n, seed)]
    for r in recipes:
        write_text_atomic(out_dir / "recipes" / f"{r['label']}.json", json.dumps(r, indent=1, sort_keys=True) + "\n")
    for name, cfg in _config_files(recipes).items():
        write_text_atomic(out_dir / name, json.dumps(cfg, indent=1, sort_keys=True) + "\n")
    rows = results_skeleton(recipes)
    write_text_atomic(out_dir / "results.json", json.dumps(rows, indent=1) + "\n")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    write_text_atomic(out_dir / "results.csv", buf.getvalue())
    index = {"grids": list(names), "seed": int(seed), "recipes": [r["label"] for r in recipes],
             "placeholders": {INGESTED: "manifest written by `aerialsynth ingest`"}}
    write_text_atomic(out_dir / "grid.json", json.dumps(index, indent=1, sort_keys=True) + "\n")
    return index
