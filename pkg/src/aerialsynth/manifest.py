"""Annotations and the dataset manifest shared by every pipeline stage.

On disk a manifest is one JSON document::

    {"version": 1, "tool_version": "...", "config": {...},
     "images": [{"id", "file", "width", "height", "gsd", "split",
                 "annotations": [{"class_id", "aabb": [x0, y0, x1, y1],
                                  "obb": {"cx", "cy", "w", "h", "angle_deg"},
                                  "is_partial", "provenance"}],
                 "seg_mask_file"?}]}

Extra top-level keys (``notes``, ``drops``) are carried through untouched.
Serialisation is canonical (sorted keys, fixed indent) so equal manifests
are byte-equal.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from . import __version__
from .geometry import AABB, RotatedRect, aabb_of
from .raster import write_text_atomic

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class Annotation:
    class_id: int
    aabb: AABB
    obb: RotatedRect
    is_partial: bool = False
    provenance: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_obb(cls, obb: RotatedRect, class_id: int = 0, is_partial: bool = False,
                 provenance: dict | None = None) -> "Annotation":
        return cls(class_id, aabb_of(obb), obb, is_partial, dict(provenance or {}))

    def to_dict(self) -> dict:
        return {"class_id": int(self.class_id), "aabb": [float(v) for v in self.aabb.as_list()],
                "obb": self.obb.to_dict(), "is_partial": bool(self.is_partial),
                "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        return cls(int(d["class_id"]), AABB(*d["aabb"]), RotatedRect.from_dict(d["obb"]),
                   bool(d.get("is_partial", False)), dict(d.get("provenance") or {}))


@dataclass
class ImageRecord:
    id: str
    file: str
    width: int
    height: int
    gsd: float | None = None
    split: str | None = None
    annotations: list[Annotation] = field(default_factory=list)
    seg_mask_file: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"id": self.id, "file": self.file, "width": int(self.width), "height": int(self.height),
             "gsd": self.gsd, "split": self.split,
             "annotations": [a.to_dict() for a in self.annotations]}
        if self.seg_mask_file is not None:
            d["seg_mask_file"] = self.seg_mask_file
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRecord":
        known = {"id", "file", "width", "height", "gsd", "split", "annotations", "seg_mask_file"}
        return cls(str(d["id"]), d["file"], int(d["width"]), int(d["height"]), d.get("gsd"),
                   d.get("split"), [Annotation.from_dict(a) for a in d.get("annotations", [])],
                   d.get("seg_mask_file"), {k: v for k, v in d.items() if k not in known})


@dataclass
class DatasetManifest:
    config: dict = field(default_factory=dict)
    images: list[ImageRecord] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    root: Path | None = field(default=None, compare=False)

    def __len__(self):
        return len(self.images)

    @property
    def annotation_count(self) -> int:
        return sum(len(r.annotations) for r in self.images)

    def resolve(self, relpath: str) -> Path:
        p = Path(relpath)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p

    def with_images(self, images: list[ImageRecord], **extra: Any) -> "DatasetManifest":
        return replace(self, images=list(images), extra={**self.extra, **extra})

    def to_dict(self) -> dict:
        d = {"version": MANIFEST_VERSION, "tool_version": __version__, "config": self.config,
             "images": [r.to_dict() for r in self.images]}
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_text_atomic(path, self.to_json())
        return path

    @classmethod
    def from_dict(cls, d: dict, root: Path | None = None) -> "DatasetManifest":
        known = {"version", "tool_version", "config", "images"}
        return cls(dict(d.get("config") or {}), [ImageRecord.from_dict(r) for r in d.get("images", [])],
                   {k: v for k, v in d.items() if k not in known}, root)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), root=path.parent)
