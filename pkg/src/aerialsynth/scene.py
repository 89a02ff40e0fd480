"""Artificial scenes: noisy canvas, non-overlapping vehicles, annotations, masks."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .blueprint import load_blueprint_dir, prepare, stock_blueprint_dir
from .errors import ConfigError
from .geometry import Point2, RotatedRect, aabb_of, points_in_rect, rects_intersect
from .instance import DEFAULT_PALETTE, ColorPalette, VehicleInstance, colorize, cut_partial, deform
from .manifest import Annotation, DatasetManifest, ImageRecord
from .raster import bilinear_sample, to_uint8, upsample_cubic, write_png

log = logging.getLogger(__name__)

IMAGENET_MEAN_RGB = (124, 117, 104)
MAX_PLACEMENT_ATTEMPTS = 100


@dataclass(frozen=True)
class GeneratorConfig:
    canvas_px: int = 600
    gsd: float = 0.10
    base_color: tuple[int, int, int] = IMAGENET_MEAN_RGB
    fine_noise_var: float = 5.0
    rough_noise_var: float = 10.0
    rough_grid: int = 10
    vehicles_per_image: int = 10
    partial_per_image: int = 3
    outline_mode: str = "black"
    deform_max: float = 0.05
    enable_fine_noise: bool = True
    enable_rough_noise: bool = True
    enable_cut: bool = True
    enable_deform: bool = True
    noise_over_vehicles: bool = False
    seed: int = 0
    image_count: int = 1000
    blueprint_dir: str | None = None
    palette: str | None = None
    min_region_px: int = 0
    class_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_color", tuple(int(c) for c in self.base_color))
        if self.canvas_px < 64:
            raise ConfigError("canvas_px must be >= 64")
        if self.rough_grid < 2:
            raise ConfigError("rough_grid must be >= 2")
        if self.fine_noise_var < 0 or self.rough_noise_var < 0:
            raise ConfigError("noise variances must be >= 0")
        if not 0 <= self.partial_per_image <= self.vehicles_per_image:
            raise ConfigError("need 0 <= partial_per_image <= vehicles_per_image")
        if self.outline_mode not in ("black", "body"):
            raise ConfigError("outline_mode must be 'black' or 'body'")
        if self.gsd <= 0 or self.deform_max < 0 or self.image_count < 0:
            raise ConfigError("gsd must be > 0, deform_max and image_count >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        if len(self.base_color) != 3 or not all(0 <= c <= 255 for c in self.base_color):
            raise ConfigError("base_color must be an RGB triple")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["base_color"] = list(self.base_color)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **kw) -> "GeneratorConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class GeneratedImage:
    pixels: np.ndarray = field(repr=False)
    annotations: list[Annotation]
    seg_mask: np.ndarray = field(repr=False)
    index: int
    rng_stream_id: str
    drops: list[dict] = field(default_factory=list)


def image_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one image; independent of generation order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


@lru_cache(maxsize=16)
def _blueprint_set(blueprint_dir: str | None, gsd: float, min_region_px: int):
    src = load_blueprint_dir(blueprint_dir or stock_blueprint_dir())
    return tuple(prepare(src, gsd, min_region_px))


@lru_cache(maxsize=16)
def _palette(path: str | None) -> ColorPalette:
    return DEFAULT_PALETTE if path is None else ColorPalette.from_json(path)


def blueprints_for(cfg: GeneratorConfig):
    return _blueprint_set(cfg.blueprint_dir, float(cfg.gsd), int(cfg.min_region_px))


def noise_field(cfg: GeneratorConfig, rng: np.random.Generator, shape=None) -> np.ndarray:
    """Achromatic intensity offsets; rough layer drawn before the fine one."""
    h, w = shape or (cfg.canvas_px, cfg.canvas_px)
    out = np.zeros((h, w))
    if cfg.enable_rough_noise:
        grid = rng.normal(0.0, math.sqrt(cfg.rough_noise_var), size=(cfg.rough_grid, cfg.rough_grid))
        out += upsample_cubic(grid, h, w)
    if cfg.enable_fine_noise:
        out += rng.normal(0.0, math.sqrt(cfg.fine_noise_var), size=(h, w))
    return out


def make_background(cfg: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.canvas_px
    base = np.broadcast_to(np.asarray(cfg.base_color, dtype=np.float64), (n, n, 3))
    if not (cfg.enable_rough_noise or cfg.enable_fine_noise):
        return to_uint8(base)
    return to_uint8(base + noise_field(cfg, rng)[..., None])


def _composite(canvas: np.ndarray, inst: VehicleInstance, rect: RotatedRect, theta: float) -> None:
    """Rotate ``inst`` by ``theta`` degrees onto float ``canvas`` in place (premultiplied over).

    ``theta`` is the full turn; ``rect.angle`` only keeps it modulo 180.
    """
    h, w = canvas.shape[:2]
    box = aabb_of(rect)
    x0 = max(int(math.floor(box.x_min - 1)), 0)
    y0 = max(int(math.floor(box.y_min - 1)), 0)
    x1 = min(int(math.ceil(box.x_max + 1)), w)
    y1 = min(int(math.ceil(box.y_max + 1)), h)
    if x0 >= x1 or y0 >= y1:
        return
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    px = np.arange(x0, x1) + 0.5 - rect.center.x
    py = np.arange(y0, y1) + 0.5 - rect.center.y
    dx, dy = np.meshgrid(px, py)
    sx = dx * c + dy * s + inst.pixels.shape[1] / 2.0
    sy = -dx * s + dy * c + inst.pixels.shape[0] / 2.0
    rgba = bilinear_sample(inst.pixels, sx, sy)
    a = rgba[..., 3:4] / 255.0
    region = canvas[y0:y1, x0:x1]
    region *= 1.0 - a
    region += rgba[..., :3]


def place_instances(canvas: np.ndarray, instances, rng: np.random.Generator,
                    class_id: int = 0, return_drops: bool = False):
    """Rotate and paste each instance at a random non-overlapping pose.

    An instance that fails ``MAX_PLACEMENT_ATTEMPTS`` draws is dropped (logged).
    Returns ``(raster, annotations)``, plus the drop list if requested.
    """
    h, w = canvas.shape[:2]
    out = canvas.astype(np.float64)
    placed: list[RotatedRect] = []
    annotations: list[Annotation] = []
    drops: list[dict] = []
    for i, inst in enumerate(instances):
        rect = None
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            theta = float(rng.uniform(0.0, 360.0))
            probe = RotatedRect(Point2(0.0, 0.0), inst.footprint_w, inst.footprint_h, theta)
            ext = aabb_of(probe)
            ex, ey = ext.x_max, ext.y_max
            cx = float(rng.uniform(ex, w - ex)) if 2 * ex <= w else None
            cy = float(rng.uniform(ey, h - ey)) if 2 * ey <= h else None
            if cx is None or cy is None:
                continue
            cand = RotatedRect(Point2(cx, cy), inst.footprint_w, inst.footprint_h, theta)
            if not any(rects_intersect(cand, p) for p in placed):
                rect = cand
                break
        if rect is None:
            log.info("dropping instance %d after %d placement attempts", i, MAX_PLACEMENT_ATTEMPTS)
            drops.append({"instance": i, **inst.source})
            continue
        placed.append(rect)
        _composite(out, inst, rect, theta)
        annotations.append(Annotation.from_obb(rect, class_id, inst.is_partial,
                                               {"instance": i, **inst.source}))
    raster = to_uint8(out)
    if return_drops:
        return raster, annotations, drops
    return raster, annotations


def render_seg_mask(annotations, canvas_px) -> np.ndarray:
    """1 where a pixel centre lies inside at least one obb (closed)."""
    h, w = (canvas_px, canvas_px) if np.isscalar(canvas_px) else canvas_px
    mask = np.zeros((h, w), dtype=np.uint8)
    for a in annotations:
        obb = a.obb if isinstance(a, Annotation) else a
        box = aabb_of(obb)
        x0 = max(int(math.floor(box.x_min)), 0)
        y0 = max(int(math.floor(box.y_min)), 0)
        x1 = min(int(math.ceil(box.x_max)) + 1, w)
        y1 = min(int(math.ceil(box.y_max)) + 1, h)
        if x0 >= x1 or y0 >= y1:
            continue
        gx, gy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
        mask[y0:y1, x0:x1] |= points_in_rect(obb, gx, gy).astype(np.uint8)
    return mask


def artificial_instances(cfg: GeneratorConfig, rng: np.random.Generator, blueprints=None):
    bps = blueprints if blueprints is not None else blueprints_for(cfg)
    palette = _palette(cfg.palette)
    n = cfg.vehicles_per_image
    picks = rng.integers(len(bps), size=n)
    insts = [colorize(bps[int(k)], palette, cfg.outline_mode, rng) for k in picks]
    if cfg.enable_cut and cfg.partial_per_image > 0:
        chosen = np.sort(rng.choice(n, size=cfg.partial_per_image, replace=False))
        for k in chosen:
            insts[k] = cut_partial(insts[k], rng)
    if cfg.enable_deform:
        insts = [deform(v, cfg.deform_max, rng) for v in insts]
    return insts


def render_scene(cfg: GeneratorConfig, rng: np.random.Generator, instances, background=None):
    """Shared tail of every scene: background, placement, optional late noise.

    ``background`` is a ready canvas (real patch) or ``None`` for the
    generated one.  Returns ``(pixels, annotations, drops)``.
    """
    if background is None:
        n = cfg.canvas_px
        if cfg.noise_over_vehicles:
            base = np.broadcast_to(np.asarray(cfg.base_color, dtype=np.uint8), (n, n, 3)).copy()
            pixels, annotations, drops = place_instances(base, instances, rng, cfg.class_id, True)
            if cfg.enable_rough_noise or cfg.enable_fine_noise:
                pixels = to_uint8(pixels + noise_field(cfg, rng)[..., None])
            return pixels, annotations, drops
        background = make_background(cfg, rng)
    return place_instances(background, instances, rng, cfg.class_id, True)


def generate_image(cfg: GeneratorConfig, index: int, blueprints=None) -> GeneratedImage:
    if not 0 <= index < cfg.image_count:
        raise ConfigError(f"index {index} outside [0, {cfg.image_count})")
    rng = image_rng(cfg.seed, index)
    instances = artificial_instances(cfg, rng, blueprints)
    pixels, annotations, drops = render_scene(cfg, rng, instances)
    seg = render_seg_mask(annotations, pixels.shape[:2])
    return GeneratedImage(pixels, annotations, seg, index, f"{cfg.seed}:{index}", drops)


def write_image(out_dir: Path, img: GeneratedImage, gsd: float, prefix: str = "") -> ImageRecord:
    name = f"img_{img.index:06d}.png"
    seg_name = f"seg_{img.index:06d}.png"
    write_png(out_dir / name, img.pixels)
    write_png(out_dir / seg_name, img.seg_mask * np.uint8(255))
    extra = {"rng_stream": img.rng_stream_id}
    if img.drops:
        extra["drops"] = img.drops
    return ImageRecord(f"{prefix}{img.index:06d}", name, img.pixels.shape[1], img.pixels.shape[0],
                       gsd, None, img.annotations, seg_name, extra)


def _generate_and_write(args):
    cfg, index, out_dir = args
    return write_image(Path(out_dir), generate_image(cfg, index), cfg.gsd).to_dict()


def run_parallel(fn, jobs, workers: int = 1):
    """Map ``fn`` over ``jobs`` keeping order; a process pool when ``workers > 1``."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (workers * 8))))


def generate_dataset(cfg: GeneratorConfig, out_dir, workers: int = 1) -> DatasetManifest:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blueprints_for(cfg)  # fail fast on bad blueprint sets before forking
    jobs = [(cfg, i, str(out_dir)) for i in range(cfg.image_count)]
    records = [ImageRecord.from_dict(d) for d in run_parallel(_generate_and_write, jobs, workers)]
    drops = sum(len(r.extra.get("drops", [])) for r in records)
    manifest = DatasetManifest(cfg.to_dict(), records,
                               {"seed": int(cfg.seed), "kind": "artificial", "dropped_instances": drops},
                               out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest
