"""Semantic label rasters (Potsdam-style colour codes) to detection annotations."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DataError, DegenerateGeometryError
from .geometry import Point2, RotatedRect, min_area_rect
from .manifest import Annotation

POTSDAM_CAR = (255, 255, 0)
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ClassColorMap:
    entries: dict[tuple[int, int, int], int]
    tolerance: int = 0

    def __post_init__(self):
        colors = [tuple(int(v) for v in c) for c in self.entries]
        object.__setattr__(self, "entries", dict(zip(colors, self.entries.values())))
        for i, a in enumerate(colors):
            for b in colors[i + 1:]:
                if max(abs(x - y) for x, y in zip(a, b)) <= 2 * self.tolerance:
                    raise ConfigError(f"class colours {a} and {b} are within 2x tolerance")

    @classmethod
    def from_dict(cls, d: dict) -> "ClassColorMap":
        """``{"tolerance": t, "classes": [{"color": [r, g, b], "class_id": k}, ...]}``."""
        entries = {tuple(c["color"]): int(c["class_id"]) for c in d["classes"]}
        return cls(entries, int(d.get("tolerance", 0)))

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance,
                "classes": [{"color": list(c), "class_id": k} for c, k in self.entries.items()]}


POTSDAM_CAR_MAP = ClassColorMap({POTSDAM_CAR: 0}, tolerance=10)


@dataclass(frozen=True, eq=False)
class Region:
    """One 8-connected component.  ``id`` is its 1-based scan-order label."""

    id: int
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)

    @property
    def area(self) -> int:
        return int(self.rows.size)

    @property
    def centroid(self) -> Point2:
        return Point2(float(self.cols.mean() + 0.5), float(self.rows.mean() + 0.5))

    def mask(self) -> tuple[np.ndarray, int, int]:
        """(bool sub-mask, row offset, col offset) over the region's bounding box."""
        r0, c0 = int(self.rows.min()), int(self.cols.min())
        m = np.zeros((int(self.rows.max()) - r0 + 1, int(self.cols.max()) - c0 + 1), dtype=bool)
        m[self.rows - r0, self.cols - c0] = True
        return m, r0, c0


def color_match(label_raster: np.ndarray, color, tolerance: int) -> np.ndarray:
    diff = np.abs(label_raster[..., :3].astype(np.int16) - np.asarray(color, dtype=np.int16))
    return diff.max(axis=-1) <= tolerance


def extract_class_regions(label_raster: np.ndarray, class_color, tolerance: int = 0) -> list[Region]:
    hit = color_match(label_raster, class_color, tolerance)
    labels, n = ndimage.label(hit, structure=_EIGHT)
    regions = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        rr, cc = np.nonzero(labels[sl] == idx)
        regions.append(Region(idx, rr + sl[0].start, cc + sl[1].start))
    return regions


def boundary_points(region: Region) -> np.ndarray:
    """Midpoints of the outermost pixel edges (row and column extremes).

    An axis-aligned ``w x h`` block yields exactly ``w x h``; on staircase
    edges these points sit at most half a pixel outside the true boundary.
    """
    m, r0, c0 = region.mask()
    rows = np.nonzero(m.any(axis=1))[0]
    cols = np.nonzero(m.any(axis=0))[0]
    left = np.argmax(m[rows], axis=1)
    right = m.shape[1] - 1 - np.argmax(m[rows, ::-1], axis=1)
    top = np.argmax(m[:, cols], axis=0)
    bottom = m.shape[0] - 1 - np.argmax(m[::-1, cols], axis=0)
    pts = np.concatenate([
        np.stack([left, rows + 0.5], axis=1),
        np.stack([right + 1.0, rows + 0.5], axis=1),
        np.stack([cols + 0.5, top], axis=1),
        np.stack([cols + 0.5, bottom + 1.0], axis=1),
    ]).astype(np.float64)
    return pts + np.array([c0, r0], dtype=np.float64)


def refine_rect(points: np.ndarray, r: RotatedRect, corner_margin: float = 1.5) -> RotatedRect:
    """Fit one common orientation to the four sides of ``r`` by total least squares.

    Each point is assigned to its nearest side; points within ``corner_margin``
    of a corner are ignored.  Sides are then placed at the mean offset of their
    points.  Returns ``r`` unchanged when a side has no usable points.
    """
    t = math.radians(r.angle)
    u = np.array([math.cos(t), math.sin(t)])
    v = np.array([-u[1], u[0]])
    d = points - np.asarray(r.center)
    pu, pv = d @ u, d @ v
    hw, hh = r.width / 2.0, r.height / 2.0
    side = np.argmin(np.stack([np.abs(pv + hh), np.abs(pv - hh), np.abs(pu + hw), np.abs(pu - hw)]), axis=0)
    turn = np.array([[0.0, -1.0], [1.0, 0.0]])
    groups = []
    scatter = np.zeros((2, 2))
    for s in range(4):
        along, lim = (pu, hw) if s < 2 else (pv, hh)
        q = points[(side == s) & (np.abs(along) < lim - corner_margin)]
        if len(q) < 2:
            return r
        qc = q - q.mean(axis=0)
        if s >= 2:
            qc = qc @ turn
        scatter += qc.T @ qc
        groups.append(q)
    _, vecs = np.linalg.eigh(scatter)
    u = vecs[:, 1] if vecs[:, 1] @ u >= 0 else -vecs[:, 1]
    v = np.array([-u[1], u[0]])
    top, bottom, left, right = ((g @ v).mean() if s < 2 else (g @ u).mean() for s, g in enumerate(groups))
    w, h = right - left, bottom - top
    if w <= 0 or h <= 0:
        return r
    c = (left + right) / 2.0 * u + (top + bottom) / 2.0 * v
    return RotatedRect(Point2(*c), w, h, math.degrees(math.atan2(u[1], u[0]))).canonical()


def region_rect(region: Region, refine_passes: int = 2) -> RotatedRect:
    pts = boundary_points(region)
    r = min_area_rect(pts)
    for _ in range(refine_passes):
        r = refine_rect(pts, r)
    return r


def resolve_exclusions(regions, exclusions, tol: float = 2.0) -> set[int]:
    """Region ids for exclusion entries given as ids or ``{"x", "y"}`` points.

    A point excludes the region containing that pixel, or failing that the
    region whose centroid is within ``tol`` pixels.
    """
    ids: set[int] = set()
    for ex in exclusions or ():
        if isinstance(ex, (int, np.integer)):
            ids.add(int(ex))
            continue
        x, y = (ex["x"], ex["y"]) if isinstance(ex, dict) else ex
        col, row = int(math.floor(x)), int(math.floor(y))
        hit = None
        for reg in regions:
            if np.any((reg.rows == row) & (reg.cols == col)):
                hit = reg.id
                break
        if hit is None:
            for reg in regions:
                c = reg.centroid
                if math.hypot(c.x - x, c.y - y) <= tol:
                    hit = reg.id
                    break
        if hit is not None:
            ids.add(hit)
    return ids


def regions_to_annotations(regions, min_area_px: int = 0, exclusions=(), class_id: int = 0,
                           source: str | None = None) -> list[Annotation]:
    excluded = resolve_exclusions(regions, exclusions)
    out = []
    for reg in regions:
        if reg.id in excluded or reg.area < min_area_px:
            continue
        try:
            obb = region_rect(reg)
        except DegenerateGeometryError:
            # single row/column of pixels still has a well-defined extent
            m, r0, c0 = reg.mask()
            obb = RotatedRect(Point2(c0 + m.shape[1] / 2.0, r0 + m.shape[0] / 2.0),
                              float(m.shape[1]), float(m.shape[0]), 0.0)
        prov = {"region_id": reg.id, "area_px": reg.area}
        if source is not None:
            prov["source"] = source
        out.append(Annotation.from_obb(obb, class_id, False, prov))
    return out


@dataclass
class AnnotatedSample:
    id: str
    pixels: np.ndarray = field(repr=False)
    annotations: list[Annotation]
    gsd: float | None = None
    file: str | None = None


def convert_tile(rgb_raster: np.ndarray, label_raster: np.ndarray, class_map: ClassColorMap = POTSDAM_CAR_MAP,
                 min_area_px: int = 0, exclusions=(), tile_id: str = "tile", gsd: float | None = None
                 ) -> AnnotatedSample:
    if rgb_raster.shape[:2] != label_raster.shape[:2]:
        raise DataError(f"{tile_id}: image {rgb_raster.shape[:2]} and label {label_raster.shape[:2]} differ")
    anns: list[Annotation] = []
    for color, class_id in class_map.entries.items():
        regions = extract_class_regions(label_raster, color, class_map.tolerance)
        anns += regions_to_annotations(regions, min_area_px, exclusions, class_id, tile_id)
    return AnnotatedSample(tile_id, rgb_raster, anns, gsd)


def load_exclusions(path) -> dict[str, list]:
    """``{tile_id: [region_id | {"x": .., "y": ..}, ...]}``."""
    if path is None:
        return {}
    return json.loads(Path(path).read_text())
