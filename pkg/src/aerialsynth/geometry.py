"""Box arithmetic: rotated rectangles, axis-aligned boxes, SAT and calipers.

Coordinates are pixels with ``x`` along columns and ``y`` along rows.  Pixel
``(row, col)`` covers the square ``[col, col + 1] x [row, row + 1]``.  Angles
are degrees, measured from the +x axis towards +y using the ordinary rotation
matrix on ``(x, y)``.  With ``y`` pointing down in images this appears
clockwise on screen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateGeometryError

_SAT_EPS = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class AABB:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"inverted box {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def intersect(self, other: "AABB") -> "AABB | None":
        x0 = max(self.x_min, other.x_min)
        y0 = max(self.y_min, other.y_min)
        x1 = min(self.x_max, other.x_max)
        y1 = min(self.y_max, other.y_max)
        if x0 > x1 or y0 > y1:
            return None
        return AABB(x0, y0, x1, y1)

    def shifted(self, dx: float, dy: float) -> "AABB":
        return AABB(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def scaled(self, s: float) -> "AABB":
        return AABB(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)


@dataclass(frozen=True)
class RotatedRect:
    """Rectangle of size ``width x height`` whose width runs along ``angle``."""

    center: Point2
    width: float
    height: float
    angle: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"non-positive rectangle size {self.width}x{self.height}")
        object.__setattr__(self, "center", Point2(float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "angle", normalize_angle(self.angle))

    @property
    def area(self) -> float:
        return self.width * self.height

    def canonical(self) -> "RotatedRect":
        """Same rectangle with the angle folded into ``[0, 90)``."""
        if self.angle >= 90.0:
            return RotatedRect(self.center, self.height, self.width, self.angle - 90.0)
        return self

    def shifted(self, dx: float, dy: float) -> "RotatedRect":
        return RotatedRect(Point2(self.center.x + dx, self.center.y + dy),
                           self.width, self.height, self.angle)

    def scaled(self, s: float) -> "RotatedRect":
        return RotatedRect(Point2(self.center.x * s, self.center.y * s),
                           self.width * s, self.height * s, self.angle)

    def to_dict(self) -> dict:
        return {"cx": self.center.x, "cy": self.center.y,
                "w": self.width, "h": self.height, "angle_deg": self.angle}

    @classmethod
    def from_dict(cls, d: dict) -> "RotatedRect":
        return cls(Point2(d["cx"], d["cy"]), d["w"], d["h"], d["angle_deg"])


def normalize_angle(angle: float) -> float:
    a = math.fmod(float(angle), 180.0)
    if a < 0:
        a += 180.0
    # fmod can land on 180.0 after the shift for tiny negatives
    if a >= 180.0:
        a -= 180.0
    return a


def _axes(r: RotatedRect) -> tuple[np.ndarray, np.ndarray]:
    t = math.radians(r.angle)
    c, s = math.cos(t), math.sin(t)
    return np.array([c, s]), np.array([-s, c])


def corners_array(r: RotatedRect) -> np.ndarray:
    """(4, 2) array of corners, same order as :func:`corners`."""
    u, v = _axes(r)
    hw, hh = r.width / 2.0, r.height / 2.0
    c = np.array(r.center)
    return np.stack([c - hw * u - hh * v, c + hw * u - hh * v,
                     c + hw * u + hh * v, c - hw * u + hh * v])


def corners(r: RotatedRect) -> list[Point2]:
    return [Point2(float(x), float(y)) for x, y in corners_array(r)]


def aabb_of(r: RotatedRect) -> AABB:
    pts = corners_array(r)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return AABB(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def rects_intersect(a: RotatedRect, b: RotatedRect) -> bool:
    """Closed-set overlap test by separating axes; touching counts as overlap."""
    pa = corners_array(a)
    pb = corners_array(b)
    for axis in (*_axes(a), *_axes(b)):
        qa = pa @ axis
        qb = pb @ axis
        if qa.max() < qb.min() - _SAT_EPS or qb.max() < qa.min() - _SAT_EPS:
            return False
    return True


def points_in_rect(r: RotatedRect, xs, ys, tol: float = 0.0) -> np.ndarray:
    """Boolean mask of points inside ``r`` dilated by ``tol`` (closed)."""
    u, v = _axes(r)
    dx = np.asarray(xs, dtype=float) - r.center.x
    dy = np.asarray(ys, dtype=float) - r.center.y
    pu = dx * u[0] + dy * u[1]
    pv = dx * v[0] + dy * v[1]
    return (np.abs(pu) <= r.width / 2.0 + tol) & (np.abs(pv) <= r.height / 2.0 + tol)


def iou_aabb(a: AABB, b: AABB) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU for (N, 4) and (M, 4) arrays of ``[x0, y0, x1, y1]``."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise (in x/y axes), no collinear vertices."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts
    P = [tuple(p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in P:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(P):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _rotating_calipers(hull: np.ndarray):
    """Yield ``(edge_index, u, v, width, height, center)`` for every hull edge.

    ``u`` is the unit edge direction, ``v`` its left normal.  Three antipodal
    pointers (max along u, max along v, min along u) only ever advance.
    """
    n = len(hull)
    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    us = edges / lengths[:, None]

    def proj(k, axis):
        return hull[k % n] @ axis

    u0 = us[0]
    v0 = np.array([-u0[1], u0[0]])
    j = int(np.argmax(hull @ u0))
    k = int(np.argmax(hull @ v0))
    m = int(np.argmin(hull @ u0))
    for i in range(n):
        u = us[i]
        v = np.array([-u[1], u[0]])
        while proj(j + 1, u) > proj(j, u) + 1e-12:
            j = (j + 1) % n
        while proj(k + 1, v) > proj(k, v) + 1e-12:
            k = (k + 1) % n
        while proj(m + 1, u) < proj(m, u) - 1e-12:
            m = (m + 1) % n
        base = hull[i]
        lo_u = proj(m, u)
        hi_u = proj(j, u)
        lo_v = base @ v
        hi_v = proj(k, v)
        mid_u = (lo_u + hi_u) / 2.0
        mid_v = (lo_v + hi_v) / 2.0
        center = mid_u * u + mid_v * v
        yield i, u, v, hi_u - lo_u, hi_v - lo_v, center


def min_area_rect(points: Iterable[Sequence[float]]) -> RotatedRect:
    """Minimum-area enclosing rectangle, angle folded into ``[0, 90)``.

    Among (numerically) equal-area candidates the smallest angle wins.
    """
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {len(pts)}")
    hull = convex_hull(pts)
    if len(hull) < 3:
        raise DegenerateGeometryError("points are collinear")
    scale = float(np.ptp(pts, axis=0).max())
    best = None
    for _, u, _, w, h, center in _rotating_calipers(hull):
        area = w * h
        if area <= 1e-12 * scale * scale:
            raise DegenerateGeometryError("points are collinear")
        angle = math.degrees(math.atan2(u[1], u[0]))
        cand = RotatedRect(Point2(*center), w, h, angle).canonical()
        if best is None:
            best = (area, cand)
            continue
        rel = (area - best[0]) / best[0]
        if rel < -1e-9 or (abs(rel) <= 1e-9 and cand.angle < best[1].angle - 1e-9):
            best = (area, cand)
    return best[1]


def clip_polygon_to_box(poly: np.ndarray, box: AABB) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon against an axis-aligned box."""
    out = [tuple(p) for p in np.asarray(poly, dtype=float)]
    planes = [(0, box.x_min, 1), (0, box.x_max, -1), (1, box.y_min, 1), (1, box.y_max, -1)]
    for dim, val, sign in planes:
        if not out:
            break
        src, out = out, []
        for idx, cur in enumerate(src):
            prev = src[idx - 1]
            cur_in = sign * (cur[dim] - val) >= 0
            prev_in = sign * (prev[dim] - val) >= 0
            if cur_in != prev_in:
                t = (val - prev[dim]) / (cur[dim] - prev[dim])
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            if cur_in:
                out.append(cur)
    return np.array(out, dtype=float).reshape(-1, 2)


def same_pose(a: RotatedRect, b: RotatedRect) -> tuple[float, float, float]:
    """(center error, max dimension error, angle error in degrees) between two rects.

    Rectangles are symmetric under 180 degree turns and under swapping width
    and height with a 90 degree turn, so the smaller of both readings is used.
    """
    dc = math.hypot(a.center.x - b.center.x, a.center.y - b.center.y)
    best = None
    for w, h, ang in ((b.width, b.height, b.angle), (b.height, b.width, b.angle + 90.0)):
        dd = max(abs(a.width - w), abs(a.height - h))
        da = abs(normalize_angle(a.angle - ang + 90.0) - 90.0)
        if best is None or da < best[1]:
            best = (dd, da)
    return dc, best[0], best[1]
