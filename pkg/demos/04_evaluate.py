"""Score a fake detector against generated ground truth.

Detections are ground-truth boxes with jitter, a few misses and a few
false alarms, so the AP lands somewhere below 1.

    python demos/04_evaluate.py --out demo_output/eval
"""
import argparse
from pathlib import Path

import numpy as np

from aerialsynth.evaluation import Detection, average_precision, ground_truth_from_manifest
from aerialsynth.geometry import AABB
from aerialsynth.scene import GeneratorConfig, generate_dataset

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="demo_output/eval")
args = ap.parse_args()

m = generate_dataset(GeneratorConfig(image_count=5, seed=11), Path(args.out))
gt = ground_truth_from_manifest(m)
rng = np.random.default_rng(0)
dets = []
for image_id, boxes in gt.items():
    for b in boxes:
        if rng.random() < 0.15:
            continue  # missed
        jitter = rng.normal(0, 2.0, 4)
        dets.append(Detection(image_id, AABB(*(np.array(b.as_list()) + jitter)), float(rng.uniform(0.4, 1))))
    for _ in range(2):
        x, y = rng.uniform(0, 550, 2)
        dets.append(Detection(image_id, AABB(x, y, x + 40, y + 20), float(rng.uniform(0, 0.8))))

for thr in (0.5, 0.7, 0.9):
    r = average_precision(dets, gt, iou_threshold=thr)
    print(f"AP@{thr}: {r.ap:.4f}  tp {r.tp}  fp {r.fp}  fn {r.fn}")
