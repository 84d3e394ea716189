"""Raster primitives: image/mask I/O, geometry normalization, morphology,
connected components and region geometry.

Images are ``float64`` arrays of shape (H, W, 3) holding values in [0, 255];
masks are ``bool`` arrays of shape (H, W). Values are only clamped and
quantized when written to disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image
from numba import njit
from scipy import ndimage as ndi

EIGHT = np.ones((3, 3), dtype=bool)

# clockwise in (row, col) with rows growing downwards, starting west
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}
SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------- I/O

def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr.copy()


def save_image(path: str | Path, img: np.ndarray) -> None:
    out = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    Image.fromarray(out, mode="RGB").save(path)


def load_mask(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 127


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    out = np.where(mask, 255, 0).astype(np.uint8)
    Image.fromarray(out, mode="L").save(path)


# ---------------------------------------------------------------- geometry

def square_padding(width: int, height: int) -> tuple[int, int, int]:
    """Return ``(side, pad_left, pad_top)``; odd remainders go right/bottom."""
    side = max(width, height)
    return side, (side - width) // 2, (side - height) // 2


def pad_to_square(img: np.ndarray) -> np.ndarray:
    """Center ``img`` on a zero canvas of side ``max(H, W)``."""
    h, w = img.shape[:2]
    side, left, top = square_padding(w, h)
    if side == w == h:
        return img.copy()
    out = np.zeros((side, side) + img.shape[2:], dtype=img.dtype)
    out[top:top + h, left:left + w] = img
    return out


def _source_coords(dst: int, src: int) -> np.ndarray:
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    return np.clip(pos, 0.0, src - 1)


def resize_bilinear(img: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and edge clamping."""
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w = img.shape[:2]
    src = img.astype(np.float64, copy=False)
    if (h, w) == (target_h, target_w):
        return src.copy()

    ys = _source_coords(target_h, h)
    y0 = np.floor(ys).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    fy = ys - y0
    xs = _source_coords(target_w, w)
    x0 = np.floor(xs).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    fx = xs - x0

    extra = (1,) * (src.ndim - 2)
    fy = fy.reshape((-1, 1) + extra)
    rows = src[y0] * (1.0 - fy) + src[y1] * fy
    fx = fx.reshape((1, -1) + extra)
    return rows[:, x0] * (1.0 - fx) + rows[:, x1] * fx


def resize_nearest(mask: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Nearest-neighbour resize of a mask (pixel-center sampling)."""
    h, w = mask.shape[:2]
    ys = np.minimum(((np.arange(target_h) + 0.5) * (h / target_h)).astype(np.intp), h - 1)
    xs = np.minimum(((np.arange(target_w) + 0.5) * (w / target_w)).astype(np.intp), w - 1)
    return mask[ys[:, None], xs[None, :]]


# -------------------------------------------------------------- morphology

@dataclass(frozen=True)
class StructuringElement:
    radius: int
    offsets: tuple[tuple[int, int], ...]

    @property
    def footprint(self) -> np.ndarray:
        return _disk_footprint(self.radius).copy()

    def __len__(self) -> int:
        return len(self.offsets)


@lru_cache(maxsize=None)
def _disk_footprint(radius: int) -> np.ndarray:
    y, x = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    fp = x * x + y * y <= radius * radius
    fp.setflags(write=False)
    return fp


def disk(radius: int) -> StructuringElement:
    """Digital disk: every integer offset with dx**2 + dy**2 <= radius**2."""
    if radius < 0 or int(radius) != radius:
        raise ValueError(f"radius must be a non-negative integer, got {radius!r}")
    radius = int(radius)
    fp = _disk_footprint(radius)
    dys, dxs = np.nonzero(fp)
    offsets = tuple((int(dx) - radius, int(dy) - radius) for dy, dx in zip(dys, dxs))
    return StructuringElement(radius, offsets)


@njit(cache=True)
def _dilate_disk(mask, half_widths):
    """Binary dilation by a disk given its per-row half widths; pixels
    beyond the border are background."""
    h, w = mask.shape
    r = half_widths.shape[0] - 1
    big = r + 1
    # hd: horizontal distance to the nearest set pixel in the row, capped
    hd = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        last = -big - w
        for x in range(w):
            if mask[y, x]:
                last = x
            hd[y, x] = min(x - last, big)
        last = 2 * w + big
        for x in range(w - 1, -1, -1):
            if mask[y, x]:
                last = x
            d = min(last - x, big)
            if d < hd[y, x]:
                hd[y, x] = d
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for dy in range(max(-r, -y), min(r, h - 1 - y) + 1):
            yy = y + dy
            hw = half_widths[abs(dy)]
            for x in range(w):
                if not out[y, x] and hd[yy, x] <= hw:
                    out[y, x] = True
    return out


def _half_widths(radius: int) -> np.ndarray:
    return np.array([math.isqrt(radius * radius - dy * dy) for dy in range(radius + 1)],
                    dtype=np.int64)


def dilate(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Binary dilation; pixels outside the image are background."""
    m = np.ascontiguousarray(mask, dtype=bool)
    return _dilate_disk(m, _half_widths(se.radius))


def erode(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Binary erosion; pixels outside the image count as foreground, so
    erosion is the exact dual of :func:`dilate` and closing is extensive."""
    m = np.ascontiguousarray(~np.asarray(mask, dtype=bool))
    return ~_dilate_disk(m, _half_widths(se.radius))


def opening(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    return dilate(erode(mask, se), se)


def closing(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    return erode(dilate(mask, se), se)


# For a disk, clamping an out-of-image offset to the edge lands on a pixel that
# is itself inside the window, so mode="nearest" equals max/min over the
# in-image part of the window.
def grey_dilate(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    return ndi.grey_dilation(plane, footprint=_disk_footprint(se.radius), mode="nearest")


def grey_erode(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    return ndi.grey_erosion(plane, footprint=_disk_footprint(se.radius), mode="nearest")


def grey_closing(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    return grey_erode(grey_dilate(plane, se), se)


def grey_opening(plane: np.ndarray, se: StructuringElement) -> np.ndarray:
    return grey_dilate(grey_erode(plane, se), se)


def median3x3(plane: np.ndarray) -> np.ndarray:
    """3x3 median with edge-replicated borders."""
    return ndi.median_filter(plane, size=3, mode="nearest")


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Set background pixels that cannot reach the border (4-connected)."""
    return ndi.binary_fill_holes(mask, structure=ndi.generate_binary_structure(2, 1))


# ------------------------------------------------------------------ regions

@dataclass(frozen=True, eq=False)
class Region:
    """One 8-connected component, stored as a bounding-box crop.

    ``centroid`` is ``(x, y)`` in full-image pixel coordinates.
    """

    shape: tuple[int, int]
    top: int
    left: int
    crop: np.ndarray = field(repr=False)
    area: int
    perimeter: float
    centroid: tuple[float, float]
    convex_area: int
    cluster: int = -1

    @property
    def bbox(self) -> tuple[slice, slice]:
        h, w = self.crop.shape
        return slice(self.top, self.top + h), slice(self.left, self.left + w)

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.bbox] = self.crop
        return out

    def pixels(self, img: np.ndarray) -> np.ndarray:
        """Values of ``img`` under the region, shape (area, ...)."""
        return img[self.bbox][self.crop]


def region_from_crop(shape, top, left, crop, cluster=-1) -> Region:
    rows, cols = np.nonzero(crop)
    area = int(rows.size)
    if area == 0:
        raise ValueError("empty region")
    centroid = (left + float(cols.mean()), top + float(rows.mean()))
    return Region(
        shape=tuple(shape),
        top=int(top),
        left=int(left),
        crop=crop,
        area=area,
        perimeter=chain_code_perimeter(crop),
        centroid=centroid,
        convex_area=convex_hull_pixel_count(crop),
        cluster=cluster,
    )


def connected_components(mask: np.ndarray, cluster: int = -1) -> list[Region]:
    """8-connected regions of ``mask`` in raster order of their first pixel."""
    labels, n = ndi.label(mask, structure=EIGHT)
    regions = []
    for idx, sl in enumerate(ndi.find_objects(labels), start=1):
        if sl is None:
            continue
        crop = labels[sl] == idx
        regions.append(region_from_crop(mask.shape, sl[0].start, sl[1].start, crop, cluster))
    return regions


def trace_boundary(mask: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour trace of the outer boundary of the first component.

    Returns the closed sequence of (row, col) boundary pixels; the first
    pixel is repeated at the end. A lone pixel yields ``[p]``.
    """
    padded = np.pad(mask.astype(bool), 1)
    nz = np.flatnonzero(padded)
    if nz.size == 0:
        return []
    w = padded.shape[1]
    start = divmod(int(nz[0]), w)
    path = [start]
    # the west neighbour of the first raster pixel is background
    cur, back = start, (start[0], start[1] - 1)
    first_step = None
    limit = 8 * int(padded.sum()) + 8
    for _ in range(limit):
        d = _MOORE_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        nxt = None
        for k in range(1, 9):
            dr, dc = _MOORE[(d + k) % 8]
            cand = (cur[0] + dr, cur[1] + dc)
            if padded[cand]:
                nxt = cand
                break
            back = cand
        if nxt is None:
            return [(start[0] - 1, start[1] - 1)]
        if first_step is None:
            first_step = nxt
        elif cur == start and nxt == first_step:
            break
        path.append(nxt)
        cur = nxt
    else:  # pragma: no cover - tracing always closes on a finite component
        raise RuntimeError("boundary trace did not close")
    return [(r - 1, c - 1) for r, c in path]


def chain_code_perimeter(mask: np.ndarray) -> float:
    """Outer-boundary chain-code length: axis steps 1, diagonal steps sqrt(2)."""
    path = trace_boundary(mask)
    axis = diag = 0
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        if r0 != r1 and c0 != c1:
            diag += 1
        else:
            axis += 1
    return axis + diag * SQRT2


def _hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = sorted(set(map(tuple, points.tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=np.int64)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def convex_hull_pixel_count(mask: np.ndarray) -> int:
    """Number of pixel centers inside or on the convex hull of ``mask``."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return 0
    sub = mask[rows]
    first = sub.argmax(axis=1)
    last = sub.shape[1] - 1 - sub[:, ::-1].argmax(axis=1)
    pts = np.concatenate([np.stack([first, rows], 1), np.stack([last, rows], 1)])
    hull = _hull(pts)  # (x, y) vertices
    if len(hull) == 1:
        return 1

    y_lo, y_hi = int(hull[:, 1].min()), int(hull[:, 1].max())
    ys = np.arange(y_lo, y_hi + 1)
    xl = np.full(ys.size, np.inf)
    xr = np.full(ys.size, -np.inf)
    for (x0, y0), (x1, y1) in zip(hull, np.roll(hull, -1, axis=0)):
        a, b = min(y0, y1), max(y0, y1)
        span = ys[(ys >= a) & (ys <= b)]
        if y0 == y1:
            xs_lo = np.full(span.size, float(min(x0, x1)))
            xs_hi = np.full(span.size, float(max(x0, x1)))
        else:
            xs_lo = xs_hi = x0 + (span - y0) * ((x1 - x0) / (y1 - y0))
        idx = span - y_lo
        xl[idx] = np.minimum(xl[idx], xs_lo)
        xr[idx] = np.maximum(xr[idx], xs_hi)
    counts = np.floor(xr + 1e-9) - np.ceil(xl - 1e-9) + 1
    return int(np.clip(counts, 0, None).sum())
