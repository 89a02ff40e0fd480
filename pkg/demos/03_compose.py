"""Mix real and artificial vehicles and backgrounds in all four ways.

    python demos/03_compose.py --out demo_output/compose
"""
import argparse
from pathlib import Path

from _mosaic import labelled_mosaic
from aerialsynth.compose import compose_dataset, harvest_backgrounds, harvest_vehicles
from aerialsynth.ingest import convert_tile
from aerialsynth.manifest import DatasetManifest, ImageRecord
from aerialsynth.raster import write_png
from aerialsynth.scene import GeneratorConfig
from aerialsynth.tiler import TilingSpec, tile_dataset

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="demo_output/compose")
ap.add_argument("--images", type=int, default=4)
args = ap.parse_args()
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

rgb, lab = labelled_mosaic(n=1800, cars=40, seed=2)
s = convert_tile(rgb, lab, tile_id="mosaic", gsd=0.05)
write_png(out / "mosaic.png", rgb)
DatasetManifest({}, [ImageRecord("mosaic", "mosaic.png", 1800, 1800, 0.05, None, s.annotations)], {},
                out).save(out / "ingested.json")

# keep the empty patches: they are the real backgrounds
tiled = tile_dataset(out / "ingested.json", TilingSpec(drop_empty=False), out / "patches")
vehicles = harvest_vehicles(tiled, out / "patches" / "manifest.json")
backgrounds = harvest_backgrounds(tiled, out / "patches" / "manifest.json")
print(f"pools: {len(vehicles)} real vehicle crops, {len(backgrounds)} real backgrounds")

cfg = GeneratorConfig(image_count=args.images, seed=3)
for vs in ("artificial", "real"):
    for bs in ("artificial", "real"):
        m = compose_dataset(vs, bs, cfg, out / f"{vs}_vehicles_{bs}_background", vehicles, backgrounds)
        size = f"{m.images[0].width}x{m.images[0].height}"
        print(f"{vs:>10} vehicles on {bs:>10} background: {len(m)} images of {size}, "
              f"{m.annotation_count} vehicles")
