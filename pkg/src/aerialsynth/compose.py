"""Four-way mixing of {artificial, real} vehicles with {artificial, real} backgrounds.

Real backgrounds are vehicle-free patches of an ingested/tiled manifest; real
vehicles are rectangular obb crops of annotated patches.  Pasting is done by
the scene placer, so composed images obey the same pose and non-overlap rules
as generated ones, and the (artificial, artificial) case reproduces
:func:`aerialsynth.scene.generate_dataset` byte for byte.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyPoolError
from .instance import VehicleInstance
from .manifest import DatasetManifest, ImageRecord
from .raster import bilinear_sample, read_rgb, to_uint8, write_text_atomic
from .scene import (GeneratedImage, GeneratorConfig, artificial_instances, blueprints_for, image_rng,
                    render_scene, render_seg_mask, run_parallel, write_image)

SOURCES = ("artificial", "real")


@dataclass
class BackgroundPool:
    files: list[Path]
    image_ids: list[str]
    manifest_path: str | None = None

    def __len__(self):
        return len(self.files)

    def load(self, k: int) -> np.ndarray:
        return read_rgb(self.files[k])

    def save(self, path) -> None:
        doc = {"kind": "background", "manifest": self.manifest_path,
               "entries": [{"image_id": i, "file": str(f)} for i, f in zip(self.image_ids, self.files)]}
        write_text_atomic(Path(path), json.dumps(doc, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load_index(cls, path) -> "BackgroundPool":
        doc = json.loads(Path(path).read_text())
        if doc.get("kind") != "background":
            raise ConfigError(f"{path} is not a background pool index")
        e = doc["entries"]
        if not e:
            raise EmptyPoolError(f"{path}: empty background pool")
        return cls([Path(d["file"]) for d in e], [d["image_id"] for d in e], doc.get("manifest"))


@dataclass
class VehicleCrop:
    pixels: np.ndarray = field(repr=False)  # premultiplied RGBA, fully opaque
    obb_w: float
    obb_h: float
    image_id: str
    annotation_index: int

    def instance(self) -> VehicleInstance:
        h, w = self.pixels.shape[:2]
        return VehicleInstance(self.pixels, w, h,
                               source={"image_id": self.image_id, "annotation_index": self.annotation_index})


@dataclass
class VehicleCropPool:
    crops: list[VehicleCrop]
    manifest_path: str | None = None

    def __len__(self):
        return len(self.crops)

    def save(self, path) -> None:
        doc = {"kind": "vehicle", "manifest": self.manifest_path,
               "entries": [{"image_id": c.image_id, "annotation_index": c.annotation_index,
                            "w": c.obb_w, "h": c.obb_h} for c in self.crops]}
        write_text_atomic(Path(path), json.dumps(doc, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load_index(cls, path) -> "VehicleCropPool":
        """Re-harvest the crops listed in an index from its source manifest."""
        doc = json.loads(Path(path).read_text())
        if doc.get("kind") != "vehicle":
            raise ConfigError(f"{path} is not a vehicle pool index")
        wanted = [(d["image_id"], d["annotation_index"]) for d in doc["entries"]]
        full = harvest_vehicles(DatasetManifest.load(doc["manifest"]), doc["manifest"])
        by_key = {(c.image_id, c.annotation_index): c for c in full.crops}
        return cls([by_key[k] for k in wanted], doc["manifest"])


def harvest_backgrounds(manifest: DatasetManifest, manifest_path=None) -> BackgroundPool:
    recs = [r for r in manifest.images if not r.annotations]
    if not recs:
        raise EmptyPoolError("no vehicle-free images to use as backgrounds (tile with drop_empty off)")
    return BackgroundPool([manifest.resolve(r.file).resolve() for r in recs], [r.id for r in recs],
                          None if manifest_path is None else str(Path(manifest_path).resolve()))


def crop_obb(img: np.ndarray, obb) -> np.ndarray:
    """Axis-aligned ``round(h) x round(w)`` resampling of the obb region, as opaque RGBA."""
    cw, ch = max(1, int(round(obb.width))), max(1, int(round(obb.height)))
    u = ((np.arange(cw) + 0.5) / cw - 0.5) * obb.width
    v = ((np.arange(ch) + 0.5) / ch - 0.5) * obb.height
    uu, vv = np.meshgrid(u, v)
    t = math.radians(obb.angle)
    c, s = math.cos(t), math.sin(t)
    xs = obb.center.x + uu * c - vv * s
    ys = obb.center.y + uu * s + vv * c
    rgb = to_uint8(bilinear_sample(img[..., :3], xs, ys, clamp=True))
    return np.concatenate([rgb, np.full((ch, cw, 1), 255, dtype=np.uint8)], axis=2)


def harvest_vehicles(manifest: DatasetManifest, manifest_path=None) -> VehicleCropPool:
    crops = []
    for rec in manifest.images:
        if not rec.annotations:
            continue
        img = read_rgb(manifest.resolve(rec.file))
        for k, a in enumerate(rec.annotations):
            crops.append(VehicleCrop(crop_obb(img, a.obb), a.obb.width, a.obb.height, rec.id, k))
    return VehicleCropPool(crops, None if manifest_path is None else str(Path(manifest_path).resolve()))


def compose_image(cfg: GeneratorConfig, index: int, vehicle_source: str, background_source: str,
                  vehicles: VehicleCropPool | None = None,
                  backgrounds: BackgroundPool | None = None) -> tuple[GeneratedImage, str | None]:
    """One composed image and the id of its real background, if any.

    Random draws happen in the same order as in
    :func:`~aerialsynth.scene.generate_image`: vehicles, then background,
    then poses.  Real crops are pasted as-is (no cut, no deformation).
    """
    rng = image_rng(cfg.seed, index)
    if vehicle_source == "artificial":
        instances = artificial_instances(cfg, rng)
    else:
        picks = rng.integers(len(vehicles), size=cfg.vehicles_per_image)
        instances = [vehicles.crops[int(k)].instance() for k in picks]
    background = background_id = None
    if background_source == "real":
        k = int(rng.integers(len(backgrounds)))
        background = backgrounds.load(k)
        background_id = backgrounds.image_ids[k]
    pixels, annotations, drops = render_scene(cfg, rng, instances, background)
    seg = render_seg_mask(annotations, pixels.shape[:2])
    return GeneratedImage(pixels, annotations, seg, index, f"{cfg.seed}:{index}", drops), background_id


def _compose_and_write(args):
    cfg, index, out_dir, vsrc, bsrc, vehicles, backgrounds = args
    img, background_id = compose_image(cfg, index, vsrc, bsrc, vehicles, backgrounds)
    rec = write_image(Path(out_dir), img, cfg.gsd)
    if background_id is not None:
        rec.extra["background_image_id"] = background_id
    return rec.to_dict()


def check_sources(vehicle_source: str, background_source: str, vehicles, backgrounds) -> None:
    for s in (vehicle_source, background_source):
        if s not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}, not {s!r}")
    if vehicle_source == "real" and not vehicles:
        raise EmptyPoolError("real vehicles requested but the vehicle pool is missing or empty")
    if background_source == "real" and not backgrounds:
        raise EmptyPoolError("real backgrounds requested but the background pool is missing or empty")


def compose_dataset(vehicle_source: str, background_source: str, cfg: GeneratorConfig, out_dir,
                    vehicles: VehicleCropPool | None = None, backgrounds: BackgroundPool | None = None,
                    workers: int = 1) -> DatasetManifest:
    check_sources(vehicle_source, background_source, vehicles, backgrounds)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if vehicle_source == "artificial":
        blueprints_for(cfg)
    jobs = [(cfg, i, str(out_dir), vehicle_source, background_source,
             vehicles if vehicle_source == "real" else None,
             backgrounds if background_source == "real" else None) for i in range(cfg.image_count)]
    records = [ImageRecord.from_dict(d) for d in run_parallel(_compose_and_write, jobs, workers)]
    drops = sum(len(r.extra.get("drops", [])) for r in records)
    extra = {"seed": int(cfg.seed), "kind": "artificial", "dropped_instances": drops}
    if (vehicle_source, background_source) != ("artificial", "artificial"):
        extra.update(kind="composed", vehicle_source=vehicle_source, background_source=background_source,
                     vehicle_pool=None if vehicles is None else vehicles.manifest_path,
                     background_pool=None if backgrounds is None else backgrounds.manifest_path)
    manifest = DatasetManifest(cfg.to_dict(), records, extra, out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest
