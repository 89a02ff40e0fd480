"""Separable resampling kernels, bilinear sampling and PNG I/O."""
from __future__ import annotations

import os
import tempfile
from functools import lru_cache

import numpy as np
from PIL import Image


@lru_cache(maxsize=64)
def area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) box-filter matrix: exact overlap of output and input cells.

    Rows sum to one.  Works for both shrinking and enlarging.
    """
    scale = n_in / n_out
    edges_out = np.arange(n_out + 1) * scale
    lo = edges_out[:-1, None]
    hi = edges_out[1:, None]
    cells = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, cells + 1) - np.maximum(lo, cells), 0.0, None)
    w = overlap / overlap.sum(axis=1, keepdims=True)
    w.setflags(write=False)
    return w


def _catmull_rom(t: np.ndarray) -> np.ndarray:
    t = np.abs(t)
    out = np.zeros_like(t)
    near = t <= 1
    far = (t > 1) & (t < 2)
    out[near] = 1.5 * t[near] ** 3 - 2.5 * t[near] ** 2 + 1
    out[far] = -0.5 * t[far] ** 3 + 2.5 * t[far] ** 2 - 4 * t[far] + 2
    return out


@lru_cache(maxsize=64)
def cubic_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) Catmull-Rom interpolation matrix with clamped edges.

    Pixel centres are aligned: output centre ``i + 0.5`` maps to input
    coordinate ``(i + 0.5) * n_in / n_out - 0.5``.
    """
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    w = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for off in (-1, 0, 1, 2):
        idx = base + off
        k = _catmull_rom(src - idx)
        np.add.at(w, (rows, np.clip(idx, 0, n_in - 1)), k)
    w.setflags(write=False)
    return w


def resize_area(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-average resize of an (H, W) or (H, W, C) array; returns float64."""
    wy = area_weights(img.shape[0], out_h)
    wx = area_weights(img.shape[1], out_w)
    a = img.astype(np.float64)
    if a.ndim == 2:
        return wy @ a @ wx.T
    return np.einsum("ij,jkc,lk->ilc", wy, a, wx, optimize=True)


def upsample_cubic(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    wy = cubic_weights(grid.shape[0], out_h)
    wx = cubic_weights(grid.shape[1], out_w)
    return wy @ grid @ wx.T


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, clamp: bool = False) -> np.ndarray:
    """Sample ``img`` at continuous pixel coordinates.

    ``xs, ys`` use the corner convention (pixel ``(r, c)`` has centre
    ``(c + 0.5, r + 0.5)``).  Outside the raster the image is zero unless
    ``clamp`` is set, in which case edge pixels are repeated.
    """
    h, w = img.shape[:2]
    fx = np.asarray(xs, dtype=np.float64) - 0.5
    fy = np.asarray(ys, dtype=np.float64) - 0.5
    if clamp:
        fx = np.clip(fx, 0, w - 1)
        fy = np.clip(fy, 0, h - 1)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = fx - x0
    ty = fy - y0
    src = img.astype(np.float64, copy=False)
    extra = (1,) * (img.ndim - 2)
    out = np.zeros(fx.shape + img.shape[2:], dtype=np.float64)
    for dy, wy in ((0, 1 - ty), (1, ty)):
        for dx, wx in ((0, 1 - tx), (1, tx)):
            xi = x0 + dx
            yi = y0 + dy
            ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            weight = np.where(ok, wx * wy, 0.0)
            vals = src[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += vals * weight.reshape(weight.shape + extra)
    return out


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with centre alignment and clamped edges; returns float64."""
    h, w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h)
    xs = (np.arange(out_w) + 0.5) * (w / out_w)
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_sample(img, gx, gy, clamp=True)


def to_uint8(a: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(a), 0, 255).astype(np.uint8)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA", "L"):
            im = im.convert("RGB")
        return np.asarray(im).copy()


def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).copy()


def write_png(path, arr: np.ndarray) -> None:
    """Atomic PNG write (temp file + rename); output bytes depend only on ``arr``."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".png.tmp")
    os.close(fd)
    try:
        Image.fromarray(np.ascontiguousarray(arr)).save(tmp, format="PNG", compress_level=1)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_text_atomic(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
