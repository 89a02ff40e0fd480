"""From a label raster to training patches: ingest, tile, split, subsample.

A synthetic mosaic stands in for an orthomosaic tile pair so the demo runs
without external data.

    python demos/02_real_pipeline.py --out demo_output/real
"""
import argparse
from pathlib import Path

from _mosaic import labelled_mosaic
from aerialsynth.ingest import convert_tile
from aerialsynth.manifest import DatasetManifest, ImageRecord
from aerialsynth.raster import write_png
from aerialsynth.tiler import TilingSpec, split, subsample, tile_dataset

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="demo_output/real")
args = ap.parse_args()
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

rgb, lab = labelled_mosaic(n=3000, cars=150, seed=1)
sample = convert_tile(rgb, lab, tile_id="mosaic", gsd=0.05)
print(f"ingest: {len(sample.annotations)} car regions became obb annotations")
a = sample.annotations[0]
print(f"  first one: centre ({a.obb.center.x:.1f}, {a.obb.center.y:.1f}), "
      f"{a.obb.width:.1f} x {a.obb.height:.1f} px at {a.obb.angle:.1f} deg")

write_png(out / "mosaic.png", rgb)
DatasetManifest({}, [ImageRecord("mosaic", "mosaic.png", rgb.shape[1], rgb.shape[0], 0.05, None,
                                 sample.annotations)], {"kind": "ingested"}, out).save(out / "ingested.json")

# 600 px patches with 200 px overlap, halved to 300 px: GSD goes from 0.05 to 0.10 m/px
tiled = tile_dataset(out / "ingested.json", TilingSpec(), out / "patches")
partial = sum(a.is_partial for r in tiled.images for a in r.annotations)
print(f"tile: {len(tiled)} non-empty patches at GSD {tiled.images[0].gsd:.2f}, "
      f"{tiled.annotation_count} boxes ({partial} clipped at a patch edge)")

train, val = split(tiled, 0.3, seed=0)
print(f"split: {len(train)} train / {len(val)} val")
for n in (8, 16):
    sub = subsample(train, n, seed=0)
    print(f"  train_{n}: {[r.id for r in sub.images][:4]} ...")
