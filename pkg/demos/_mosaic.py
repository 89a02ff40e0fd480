"""Shared helper: a small labelled mosaic standing in for an orthomosaic tile pair."""
import numpy as np

from aerialsynth.geometry import Point2, RotatedRect, points_in_rect
from aerialsynth.ingest import POTSDAM_CAR


def labelled_mosaic(n=1800, cars=40, seed=0):
    """Return (rgb, label) arrays: parked cars on grey asphalt, label in Potsdam colours."""
    rng = np.random.default_rng(seed)
    rgb = (110 + rng.normal(0, 6, (n, n, 1))).clip(0, 255).astype(np.uint8).repeat(3, axis=2)
    lab = np.full((n, n, 3), 255, np.uint8)
    ys, xs = np.mgrid[0:140, 0:140] + 0.5
    per_row = max(1, (n - 80) // 220)
    for k in range(cars):
        r, c = divmod(k, per_row)
        x0, y0 = 40 + 220 * c, 40 + 180 * r
        if y0 + 140 > n:
            break
        rect = RotatedRect(Point2(70, 70), rng.uniform(70, 95), rng.uniform(32, 40), rng.uniform(0, 180))
        hit = points_in_rect(rect, xs, ys)
        lab[y0:y0 + 140, x0:x0 + 140][hit] = POTSDAM_CAR
        rgb[y0:y0 + 140, x0:x0 + 140][hit] = rng.integers(0, 256, 3)
    return rgb, lab
