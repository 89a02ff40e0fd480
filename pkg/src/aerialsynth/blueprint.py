"""Colour-masked vehicle drawings turned into surface-class rasters.

A blueprint lives on disk as a PNG painted in one colour per surface type and
a JSON sidecar with the same stem::

    {"id": "sedan", "vehicle_label": "car",
     "physical_length_m": 4.6, "physical_width_m": 1.8,
     "color_key": {"background": [255, 255, 255], "outline": [0, 0, 0],
                   "body": [255, 0, 0], "lights": [255, 255, 0],
                   "windows": [0, 0, 255]}}

The vehicle length runs along the image x axis (columns).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, EmptyVehicleError, MalformedMaskError, TooCoarseError
from .raster import area_weights, read_rgb

log = logging.getLogger(__name__)

MAX_OFF_KEY_FRACTION = 0.005


class SurfaceClass(IntEnum):
    BACKGROUND = 0
    OUTLINE = 1
    BODY = 2
    LIGHTS = 3
    WINDOWS = 4


DEFAULT_COLOR_KEY = {
    SurfaceClass.BACKGROUND: (255, 255, 255),
    SurfaceClass.OUTLINE: (0, 0, 0),
    SurfaceClass.BODY: (255, 0, 0),
    SurfaceClass.LIGHTS: (255, 255, 0),
    SurfaceClass.WINDOWS: (0, 0, 255),
}

_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class Blueprint:
    id: str
    vehicle_label: str
    mask: np.ndarray = field(repr=False)
    pixel_pitch: float
    physical_length: float
    physical_width: float

    def __post_init__(self):
        if self.physical_length <= 0 or self.physical_width <= 0:
            raise ConfigError(f"{self.id}: physical dimensions must be positive")
        if self.pixel_pitch <= 0:
            raise ConfigError(f"{self.id}: pixel pitch must be positive")
        if not np.any(self.mask == SurfaceClass.BODY):
            raise EmptyVehicleError(f"{self.id}: mask has no body pixels")
        h, w = self.mask.shape
        if abs(w - self.physical_length / self.pixel_pitch) > 1 or \
                abs(h - self.physical_width / self.pixel_pitch) > 1:
            raise MalformedMaskError(
                f"{self.id}: mask {w}x{h} px does not match "
                f"{self.physical_length}x{self.physical_width} m at {self.pixel_pitch} m/px")
        self.mask.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def histogram(self) -> dict[str, int]:
        counts = np.bincount(self.mask.ravel(), minlength=len(SurfaceClass))
        return {c.name.lower(): int(counts[c]) for c in SurfaceClass}

    def __eq__(self, other):
        if not isinstance(other, Blueprint):
            return NotImplemented
        return (self.id == other.id and self.pixel_pitch == other.pixel_pitch
                and self.physical_length == other.physical_length
                and self.physical_width == other.physical_width
                and np.array_equal(self.mask, other.mask))


def parse_color_key(raw) -> dict[SurfaceClass, tuple[int, int, int]]:
    """Accept ``{class_name: rgb}`` or ``{"r,g,b": class_name}`` mappings."""
    key = {}
    for k, v in raw.items():
        if isinstance(v, str):
            color, name = k, v
            color = tuple(int(c) for c in str(color).split(","))
        else:
            name, color = k, v
        try:
            cls = SurfaceClass[str(name).upper()]
        except KeyError:
            raise ConfigError(f"unknown surface class {name!r}") from None
        key[cls] = tuple(int(c) for c in color)
    missing = set(SurfaceClass) - set(key)
    if missing:
        raise ConfigError(f"color key misses {sorted(m.name.lower() for m in missing)}")
    return key


def classify_colors(rgb: np.ndarray, color_key, tolerance: int = 10) -> tuple[np.ndarray, float]:
    """Nearest-key-colour labelling; returns (mask, fraction of off-key pixels)."""
    classes = sorted(color_key)
    palette = np.array([color_key[c] for c in classes], dtype=np.int16)
    px = rgb.reshape(-1, 3).astype(np.int16)
    diff = np.abs(px[:, None, :] - palette[None, :, :])
    cheb = diff.max(axis=2)
    dist2 = (diff.astype(np.int32) ** 2).sum(axis=2)
    nearest = np.argmin(dist2, axis=1)
    off = cheb[np.arange(len(px)), nearest] > tolerance
    labels = np.array([int(c) for c in classes], dtype=np.uint8)[nearest]
    return labels.reshape(rgb.shape[:2]), float(off.mean()) if len(px) else 0.0


def load_blueprint(image_path, color_key=None, meta: dict | None = None,
                   tolerance: int = 10) -> Blueprint:
    """Read a masked drawing.  ``meta`` defaults to the JSON sidecar next to the image."""
    image_path = Path(image_path)
    if meta is None:
        sidecar = image_path.with_suffix(".json")
        if not sidecar.exists():
            raise ConfigError(f"{image_path.name}: no sidecar {sidecar.name}")
        meta = json.loads(sidecar.read_text())
    if color_key is None:
        color_key = parse_color_key(meta["color_key"]) if "color_key" in meta else DEFAULT_COLOR_KEY
    elif not all(isinstance(k, SurfaceClass) for k in color_key):
        color_key = parse_color_key(color_key)
    rgb = read_rgb(image_path)
    mask, off = classify_colors(rgb, color_key, tolerance)
    if off > MAX_OFF_KEY_FRACTION:
        raise MalformedMaskError(
            f"{image_path.name}: {off:.2%} of pixels match no key colour within +-{tolerance}")
    if not np.any(mask == SurfaceClass.BODY):
        raise EmptyVehicleError(f"{image_path.name}: no body pixels")
    length = float(meta["physical_length_m"])
    return Blueprint(
        id=str(meta.get("id", image_path.stem)),
        vehicle_label=str(meta.get("vehicle_label", "car")),
        mask=mask,
        pixel_pitch=length / mask.shape[1],
        physical_length=length,
        physical_width=float(meta["physical_width_m"]),
    )


def load_blueprint_dir(directory) -> list[Blueprint]:
    directory = Path(directory)
    pngs = sorted(directory.glob("*.png"))
    if not pngs:
        raise ConfigError(f"no blueprint images in {directory}")
    return [load_blueprint(p) for p in pngs]


def stock_blueprint_dir() -> Path:
    return Path(__file__).parent / "data" / "blueprints"


def _absorb_target(mask: np.ndarray, region: np.ndarray) -> int:
    ring = ndimage.binary_dilation(region, structure=_FOUR) & ~region
    if not ring.any():
        return -1
    counts = np.bincount(mask[ring], minlength=len(SurfaceClass))
    return int(np.argmax(counts))


def simplify_mask(mask: np.ndarray, min_region_px: int) -> np.ndarray:
    """Fold 4-connected non-background specks smaller than ``min_region_px``
    into the majority class around them, repeating until none remain."""
    if min_region_px < 0:
        raise ConfigError("min_region_px must be >= 0")
    out = mask.copy()
    if min_region_px == 0:
        return out
    while True:
        changed = False
        for cls in SurfaceClass:
            if cls == SurfaceClass.BACKGROUND:
                continue
            labels, n = ndimage.label(out == cls, structure=_FOUR)
            if n == 0:
                continue
            sizes = np.bincount(labels.ravel())
            small = [i for i in range(1, n + 1) if sizes[i] < min_region_px]
            for i in sorted(small, key=lambda i: (sizes[i], i)):
                region = labels == i
                if not np.all(out[region] == cls):
                    continue
                target = _absorb_target(out, region)
                if target >= 0 and target != cls:
                    out[region] = target
                    changed = True
        if not changed:
            return out


def simplify(b: Blueprint, min_region_px: int) -> Blueprint:
    return replace(b, mask=simplify_mask(b.mask, min_region_px))


def resample_classes(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Categorical resize: each output pixel takes the class covering most of its footprint."""
    h, w = mask.shape
    if (h, w) == (out_h, out_w):
        return mask.copy()
    wy = area_weights(h, out_h)
    wx = area_weights(w, out_w)
    cover = np.stack([wy @ (mask == c).astype(np.float64) @ wx.T for c in SurfaceClass])
    return np.argmax(cover, axis=0).astype(np.uint8)


def rescale(b: Blueprint, target_gsd: float) -> Blueprint:
    if target_gsd <= 0:
        raise ConfigError("target_gsd must be positive")
    out_w = int(round(b.physical_length / target_gsd))
    out_h = int(round(b.physical_width / target_gsd))
    if out_w < 2 or out_h < 2:
        raise TooCoarseError(f"{b.id}: {out_w}x{out_h} px at {target_gsd} m/px")
    mask = resample_classes(b.mask, out_h, out_w)
    if not np.any(mask == SurfaceClass.BODY):
        raise TooCoarseError(f"{b.id}: body vanished at {target_gsd} m/px")
    return replace(b, mask=mask, pixel_pitch=float(target_gsd))


def prepare(blueprints, gsd: float, min_region_px: int = 0) -> list[Blueprint]:
    return [rescale(simplify(b, min_region_px), gsd) for b in blueprints]
