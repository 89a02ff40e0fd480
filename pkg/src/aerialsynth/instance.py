"""Randomised vehicle instances: colourise a blueprint, optionally cut and deform it.

Instance rasters are RGBA with premultiplied colour, so every fully
transparent pixel is ``(0, 0, 0, 0)`` and bilinear resampling never bleeds
background colour into the vehicle edge.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .blueprint import Blueprint, SurfaceClass
from .errors import ConfigError, TooSmallError
from .raster import resize_bilinear, to_uint8

CUT_RANGE = (0.5, 0.7)

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class ColorPalette:
    body_colors: tuple[RGB, ...]
    window_colors: tuple[RGB, ...]
    light_color: RGB = (250, 240, 190)
    outline_color_black: RGB = (0, 0, 0)

    def __post_init__(self):
        if not self.body_colors or not self.window_colors:
            raise ConfigError("palette colour lists must be non-empty")
        for c in (*self.body_colors, *self.window_colors, self.light_color, self.outline_color_black):
            if len(c) != 3 or not all(0 <= int(v) <= 255 for v in c):
                raise ConfigError(f"bad RGB value {c}")

    @classmethod
    def from_json(cls, path) -> "ColorPalette":
        """Load an override file.

        A bare list of RGB triples replaces the body colours; an object may
        set any of the four fields.
        """
        raw = json.loads(Path(path).read_text())
        if isinstance(raw, list):
            return replace(DEFAULT_PALETTE, body_colors=tuple(tuple(c) for c in raw))
        kw = {}
        for name in ("body_colors", "window_colors"):
            if name in raw:
                kw[name] = tuple(tuple(c) for c in raw[name])
        for name in ("light_color", "outline_color_black"):
            if name in raw:
                kw[name] = tuple(raw[name])
        return replace(DEFAULT_PALETTE, **kw)


DEFAULT_PALETTE = ColorPalette(
    body_colors=(
        (236, 236, 236),  # white
        (24, 24, 26),     # black
        (70, 72, 76),     # dark gray
        (118, 120, 124),  # gray
        (160, 162, 166),  # light gray
        (192, 194, 198),  # silver
        (176, 28, 32),    # red
        (110, 20, 28),    # dark red
        (28, 40, 92),     # dark blue
        (92, 108, 128),   # blue-gray
        (40, 84, 52),     # green
        (200, 186, 150),  # beige
    ),
    window_colors=(
        (52, 64, 84),
        (64, 78, 100),
        (76, 92, 116),
        (90, 106, 128),
        (104, 120, 140),
    ),
)


@dataclass(frozen=True, eq=False)
class VehicleInstance:
    pixels: np.ndarray = field(repr=False)
    footprint_w: int
    footprint_h: int
    is_partial: bool = False
    cut_axis: str = "none"
    cut_fraction: float = 1.0
    deform_factors: tuple[float, float] = (1.0, 1.0)
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        h, w = self.pixels.shape[:2]
        if not (0 < self.footprint_w <= w and 0 < self.footprint_h <= h):
            raise ValueError("footprint must fit inside the raster")

    @property
    def alpha(self) -> np.ndarray:
        return self.pixels[..., 3]


def colorize(b: Blueprint, palette: ColorPalette = DEFAULT_PALETTE,
             outline_mode: str = "black", rng: np.random.Generator | None = None) -> VehicleInstance:
    if outline_mode not in ("black", "body"):
        raise ConfigError(f"outline_mode must be 'black' or 'body', not {outline_mode!r}")
    rng = np.random.default_rng() if rng is None else rng
    body = palette.body_colors[int(rng.integers(len(palette.body_colors)))]
    window = palette.window_colors[int(rng.integers(len(palette.window_colors)))]
    lut = np.zeros((len(SurfaceClass), 4), dtype=np.uint8)
    lut[SurfaceClass.OUTLINE] = (*(palette.outline_color_black if outline_mode == "black" else body), 255)
    lut[SurfaceClass.BODY] = (*body, 255)
    lut[SurfaceClass.LIGHTS] = (*palette.light_color, 255)
    lut[SurfaceClass.WINDOWS] = (*window, 255)
    pixels = lut[b.mask]
    h, w = b.mask.shape
    return VehicleInstance(pixels, w, h, source={"blueprint": b.id, "body_color": list(body)})


def cut_to(v: VehicleInstance, axis: str, fraction: float, keep_low_side: bool) -> VehicleInstance:
    """Crop ``v`` to ``round(fraction * size)`` along ``axis`` ('x' or 'y')."""
    h, w = v.pixels.shape[:2]
    if axis == "x":
        n = max(1, int(round(fraction * w)))
        pixels = v.pixels[:, :n] if keep_low_side else v.pixels[:, w - n:]
    elif axis == "y":
        n = max(1, int(round(fraction * h)))
        pixels = v.pixels[:n] if keep_low_side else v.pixels[h - n:]
    else:
        raise ValueError(f"axis must be 'x' or 'y', not {axis!r}")
    pixels = np.ascontiguousarray(pixels)
    return replace(v, pixels=pixels, footprint_w=pixels.shape[1], footprint_h=pixels.shape[0],
                   is_partial=True, cut_axis=axis, cut_fraction=float(fraction))


def cut_partial(v: VehicleInstance, rng: np.random.Generator) -> VehicleInstance:
    if v.is_partial:
        raise ValueError("instance is already partial")
    axis = "x" if rng.integers(2) == 0 else "y"
    u = float(rng.uniform(*CUT_RANGE))
    keep_low = bool(rng.integers(2) == 0)
    return cut_to(v, axis, u, keep_low)


def deform_to(v: VehicleInstance, d_left: float, d_right: float,
              d_top: float, d_bottom: float) -> VehicleInstance:
    h, w = v.pixels.shape[:2]
    sx = 1.0 + d_left + d_right
    sy = 1.0 + d_top + d_bottom
    new_w = int(round(w * sx))
    new_h = int(round(h * sy))
    if new_w < 2 or new_h < 2:
        raise TooSmallError(f"deformed instance would be {new_w}x{new_h} px")
    if (new_w, new_h) == (w, h):
        pixels = v.pixels.copy()
    else:
        pixels = to_uint8(resize_bilinear(v.pixels, new_h, new_w))
    return replace(v, pixels=pixels, footprint_w=new_w, footprint_h=new_h,
                   deform_factors=(sx, sy))


def deform(v: VehicleInstance, max_frac: float = 0.05,
           rng: np.random.Generator | None = None) -> VehicleInstance:
    if max_frac < 0:
        raise ConfigError("max_frac must be >= 0")
    rng = np.random.default_rng() if rng is None else rng
    d = rng.uniform(-max_frac, max_frac, size=4)
    return deform_to(v, *(float(x) for x in d))
