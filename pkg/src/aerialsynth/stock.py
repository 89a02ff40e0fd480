"""Procedural stand-in blueprints.

Eight simple top-down car drawings (compact car to small transporter) painted
in :data:`~aerialsynth.blueprint.DEFAULT_COLOR_KEY`.  They replace the
third-party CAD drawings, which cannot be redistributed.  The front of every
vehicle points towards +x.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import ndimage

from .blueprint import DEFAULT_COLOR_KEY, SurfaceClass
from .raster import write_png

STOCK_PITCH = 0.02

# id: (length m, width m, corner radius m, windshield x-range, rear window x-range or None,
#      side windows, vehicle label)
STOCK_DESIGNS = {
    "compact": (3.9, 1.70, 0.35, (0.62, 0.74), (0.10, 0.20), True, "compact car"),
    "sedan": (4.7, 1.80, 0.40, (0.60, 0.71), (0.15, 0.24), True, "sedan"),
    "station_wagon": (4.8, 1.80, 0.38, (0.60, 0.71), (0.05, 0.12), True, "station wagon"),
    "midrange": (4.5, 1.78, 0.40, (0.61, 0.72), (0.13, 0.22), True, "mid-range car"),
    "toprange": (5.1, 1.90, 0.45, (0.58, 0.69), (0.15, 0.24), True, "top-range car"),
    "small_van": (4.4, 1.80, 0.30, (0.70, 0.80), (0.03, 0.08), True, "small van"),
    "large_van": (5.0, 1.95, 0.28, (0.78, 0.87), (0.02, 0.06), True, "large van"),
    "transporter": (5.4, 2.00, 0.22, (0.80, 0.89), None, False, "small transporter"),
}


def draw_mask(length_m, width_m, radius_m, windshield, rear, side_windows,
              pitch: float = STOCK_PITCH) -> np.ndarray:
    w = int(round(length_m / pitch))
    h = int(round(width_m / pitch))
    # pixel centres in metres, origin at the rear-left corner
    xs = (np.arange(w) + 0.5) * pitch
    ys = (np.arange(h) + 0.5) * pitch
    X, Y = np.meshgrid(xs, ys)
    dx = np.clip(np.abs(X - length_m / 2) - (length_m / 2 - radius_m), 0, None)
    dy = np.clip(np.abs(Y - width_m / 2) - (width_m / 2 - radius_m), 0, None)
    body = np.hypot(dx, dy) <= radius_m

    mask = np.full((h, w), SurfaceClass.BACKGROUND, dtype=np.uint8)
    mask[body] = SurfaceClass.BODY
    u = X / length_m
    v = np.abs(Y - width_m / 2) / width_m  # 0 on the centre line, 0.5 at the sides

    a, b = windshield
    t = np.clip((u - a) / (b - a), 0, 1)
    mask[body & (u >= a) & (u <= b) & (v <= 0.40 - 0.06 * t)] = SurfaceClass.WINDOWS
    if rear is not None:
        a2, b2 = rear
        mask[body & (u >= a2) & (u <= b2) & (v <= 0.36)] = SurfaceClass.WINDOWS
        back = b2 + 0.03
    else:
        back = a - 0.25
    if side_windows:
        mask[body & (u > back) & (u < a - 0.02) & (v >= 0.40) & (v <= 0.44)] = SurfaceClass.WINDOWS

    ring = body & ~ndimage.binary_erosion(body, iterations=5, border_value=0)
    mask[ring] = SurfaceClass.OUTLINE
    inner = body & ~ring
    mask[inner & (u >= 0.94) & (v >= 0.20) & (v <= 0.42)] = SurfaceClass.LIGHTS
    mask[inner & (u <= 0.05) & (v >= 0.28) & (v <= 0.44)] = SurfaceClass.LIGHTS
    return mask


def paint(mask: np.ndarray, color_key=DEFAULT_COLOR_KEY) -> np.ndarray:
    lut = np.zeros((len(SurfaceClass), 3), dtype=np.uint8)
    for cls, rgb in color_key.items():
        lut[cls] = rgb
    return lut[mask]


def write_stock_blueprints(out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for bid, (length, width, radius, ws, rear, side, label) in STOCK_DESIGNS.items():
        mask = draw_mask(length, width, radius, ws, rear, side)
        png = out_dir / f"{bid}.png"
        write_png(png, paint(mask))
        meta = {"id": bid, "vehicle_label": label, "physical_length_m": length,
                "physical_width_m": width,
                "color_key": {c.name.lower(): list(rgb) for c, rgb in DEFAULT_COLOR_KEY.items()}}
        png.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")
        written.append(png)
    return written
