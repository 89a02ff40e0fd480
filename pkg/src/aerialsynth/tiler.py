"""Overlapping patches, GSD resampling, annotation clipping, splits and subsets."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DegenerateGeometryError
from .geometry import AABB, corners_array, clip_polygon_to_box, min_area_rect
from .ingest import AnnotatedSample
from .manifest import Annotation, DatasetManifest, ImageRecord
from .raster import read_rgb, resize_area, to_uint8, write_png


@dataclass(frozen=True)
class TilingSpec:
    patch_px: int = 600
    overlap_px: int = 200
    output_px: int = 300
    min_annotation_px: float = 20
    drop_empty: bool = True

    def __post_init__(self):
        if self.patch_px <= 0 or not 0 <= self.overlap_px < self.patch_px:
            raise ConfigError("need patch_px > 0 and 0 <= overlap_px < patch_px")
        if not 0 < self.output_px <= self.patch_px:
            raise ConfigError("need 0 < output_px <= patch_px")
        if self.min_annotation_px < 0:
            raise ConfigError("min_annotation_px must be >= 0")

    @property
    def stride(self) -> int:
        return self.patch_px - self.overlap_px

    def to_dict(self) -> dict:
        return {"patch_px": self.patch_px, "overlap_px": self.overlap_px, "output_px": self.output_px,
                "min_annotation_px": self.min_annotation_px, "drop_empty": self.drop_empty}

    @classmethod
    def from_dict(cls, d: dict) -> "TilingSpec":
        unknown = set(d) - set(cls().to_dict())
        if unknown:
            raise ConfigError(f"unknown tiling keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Patch(AnnotatedSample):
    row: int = 0
    col: int = 0
    origin: tuple[int, int] = (0, 0)


def tile_positions(extent_px: int, patch_px: int, overlap_px: int) -> list[int]:
    if extent_px < patch_px:
        raise DataError(f"extent {extent_px} smaller than patch {patch_px}")
    stride = patch_px - overlap_px
    n = math.ceil((extent_px - patch_px) / stride)
    return [min(k * stride, extent_px - patch_px) for k in range(n + 1)]


def clip_annotation(ann: Annotation, window: AABB) -> Annotation | None:
    """``ann`` restricted to ``window``, in window coordinates; ``None`` if nothing is left.

    A box that sticks out gets its aabb intersected with the window and its
    obb replaced by the minimum-area rectangle of the clipped polygon.
    """
    inter = ann.aabb.intersect(window)
    if inter is None or inter.area <= 0:
        return None
    dx, dy = -window.x_min, -window.y_min
    if inter == ann.aabb:
        return replace(ann, aabb=ann.aabb.shifted(dx, dy), obb=ann.obb.shifted(dx, dy))
    poly = clip_polygon_to_box(corners_array(ann.obb), window)
    if len(poly) < 3:
        return None
    try:
        obb = min_area_rect(poly)
    except DegenerateGeometryError:
        return None
    return Annotation(ann.class_id, inter.shifted(dx, dy), obb.shifted(dx, dy), True,
                      {**ann.provenance, "clipped": True})


def tile(sample: AnnotatedSample, spec: TilingSpec = TilingSpec()) -> list[Patch]:
    """Cut ``sample`` into ``patch_px`` squares (not resampled).

    Every kept annotation, clipped or not, has an aabb with both sides at
    least ``min_annotation_px``.
    """
    h, w = sample.pixels.shape[:2]
    ys = tile_positions(h, spec.patch_px, spec.overlap_px)
    xs = tile_positions(w, spec.patch_px, spec.overlap_px)
    p = spec.patch_px
    out = []
    for r, y0 in enumerate(ys):
        for c, x0 in enumerate(xs):
            window = AABB(x0, y0, x0 + p, y0 + p)
            anns = []
            for a in sample.annotations:
                clipped = clip_annotation(a, window)
                if clipped is None or min(clipped.aabb.width, clipped.aabb.height) < spec.min_annotation_px:
                    continue
                anns.append(clipped)
            if spec.drop_empty and not anns:
                continue
            out.append(Patch(f"{sample.id}_{r}_{c}", sample.pixels[y0:y0 + p, x0:x0 + p], anns,
                             sample.gsd, None, r, c, (x0, y0)))
    return out


def resample(patch: AnnotatedSample, output_px: int) -> AnnotatedSample:
    h, w = patch.pixels.shape[:2]
    if output_px > min(h, w):
        raise ConfigError(f"output_px {output_px} larger than patch {w}x{h}")
    if output_px == w:
        return patch
    f = output_px / w
    pixels = to_uint8(resize_area(patch.pixels, int(round(h * f)), output_px))
    anns = [replace(a, aabb=a.aabb.scaled(f), obb=a.obb.scaled(f)) for a in patch.annotations]
    gsd = None if patch.gsd is None else patch.gsd * w / output_px
    return replace(patch, pixels=pixels, annotations=anns, gsd=gsd)


def sample_from_record(manifest: DatasetManifest, rec: ImageRecord) -> AnnotatedSample:
    return AnnotatedSample(rec.id, read_rgb(manifest.resolve(rec.file)), list(rec.annotations), rec.gsd, rec.file)


def _tile_record(args):
    manifest_path, rec_dict, spec_dict, out_dir = args
    manifest = DatasetManifest(root=Path(manifest_path).parent)
    rec = ImageRecord.from_dict(rec_dict)
    spec = TilingSpec.from_dict(spec_dict)
    out = []
    for patch in tile(sample_from_record(manifest, rec), spec):
        small = resample(patch, spec.output_px)
        name = f"{small.id}.png"
        write_png(Path(out_dir) / name, small.pixels)
        out.append(ImageRecord(small.id, name, small.pixels.shape[1], small.pixels.shape[0], small.gsd,
                               None, small.annotations, None,
                               {"source": {"image_id": rec.id, "x": patch.origin[0], "y": patch.origin[1]}}
                               ).to_dict())
    return out


def tile_dataset(manifest_path, spec: TilingSpec, out_dir, workers: int = 1) -> DatasetManifest:
    """Tile every image of a manifest, write the patches and a sorted patch manifest."""
    from .scene import run_parallel

    manifest = DatasetManifest.load(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(manifest_path), r.to_dict(), spec.to_dict(), str(out_dir)) for r in manifest.images]
    records = [ImageRecord.from_dict(d) for batch in run_parallel(_tile_record, jobs, workers) for d in batch]
    records.sort(key=lambda r: r.id)
    result = DatasetManifest({"tiling": spec.to_dict(), "source": manifest.config}, records,
                             {"kind": "tiled", "source_images": len(manifest.images)}, out_dir)
    result.save(out_dir / "manifest.json")
    return result


def _sorted(manifest: DatasetManifest) -> list[ImageRecord]:
    return sorted(manifest.images, key=lambda r: r.id)


def split(manifest: DatasetManifest, val_fraction: float, seed: int = 0):
    """(train, val) partition; ``|val| = round_half_up(val_fraction * N)``."""
    if not 0 <= val_fraction < 1:
        raise ConfigError("val_fraction must be in [0, 1)")
    recs = _sorted(manifest)
    n_val = int(math.floor(val_fraction * len(recs) + 0.5))
    perm = np.random.default_rng(seed).permutation(len(recs))
    val_idx = set(int(i) for i in perm[:n_val])
    train = [replace(r, split="train") for i, r in enumerate(recs) if i not in val_idx]
    val = [replace(r, split="val") for i, r in enumerate(recs) if i in val_idx]
    meta = {"split_seed": int(seed), "val_fraction": val_fraction,
            "split_order": "drop_empty_then_split"}
    return manifest.with_images(train, **meta), manifest.with_images(val, **meta)


def subsample(manifest: DatasetManifest, n: int, seed: int = 0) -> DatasetManifest:
    recs = _sorted(manifest)
    if not 0 <= n <= len(recs):
        raise DataError(f"cannot draw {n} images from {len(recs)}")
    idx = np.sort(np.random.default_rng(seed).choice(len(recs), size=n, replace=False))
    return manifest.with_images([recs[int(i)] for i in idx], subsample_seed=int(seed), subsample_n=int(n))
