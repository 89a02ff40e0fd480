"""Render a handful of artificial images and look at what came out.

    python demos/01_generate.py --out demo_output/generate
"""
import argparse
from collections import Counter
from pathlib import Path

import numpy as np

from aerialsynth.geometry import corners_array
from aerialsynth.raster import read_rgb, write_png
from aerialsynth.scene import GeneratorConfig, generate_dataset


def draw_obb(img, obb, color=(255, 0, 0)):
    cs = corners_array(obb)
    for p in range(4):
        a, b = cs[p], cs[(p + 1) % 4]
        for t in np.linspace(0, 1, 200):
            x, y = (a * (1 - t) + b * t).astype(int)
            if 0 <= x < img.shape[1] and 0 <= y < img.shape[0]:
                img[y, x] = color


ap = argparse.ArgumentParser()
ap.add_argument("--out", default="demo_output/generate")
ap.add_argument("--images", type=int, default=6)
args = ap.parse_args()
out = Path(args.out)

cfg = GeneratorConfig(image_count=args.images, seed=7)
m = generate_dataset(cfg, out)
print(f"{len(m)} images, {m.annotation_count} vehicles, {m.extra['dropped_instances']} dropped")

# ten vehicles per image, three of them cut to 50-70 % of their length
for rec in m.images[:3]:
    kinds = Counter("partial" if a.is_partial else "whole" for a in rec.annotations)
    print(rec.id, dict(kinds), "blueprints:", sorted({a.provenance["blueprint"] for a in rec.annotations}))

rec = m.images[0]
img = read_rgb(m.resolve(rec.file)).copy()
for a in rec.annotations:
    draw_obb(img, a.obb)
write_png(out / "overlay_000000.png", img)
print("overlay with every obb in red:", out / "overlay_000000.png")
