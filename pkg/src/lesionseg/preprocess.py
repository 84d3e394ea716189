"""Image normalization: square padding, resize to 1024x1024, specular
reflection removal, hair removal and gray-world white balance."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import raster
from .errors import ZeroChannelWarning

SIZE = 1024
REFLECTION_PERCENTILE = 99
REFLECTION_FACTOR = 0.98
REFLECTION_MAX_PASSES = 10
HAIR_RADIUS = 5

_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


@dataclass(frozen=True)
class PadInfo:
    """Geometry needed to map 1024x1024 masks back to the original frame."""

    original_w: int
    original_h: int
    pad_left: int
    pad_top: int
    side: int

    @classmethod
    def for_size(cls, width: int, height: int) -> "PadInfo":
        side, left, top = raster.square_padding(width, height)
        return cls(width, height, left, top, side)

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.original_w, self.original_h, self.pad_left, self.pad_top, self.side)

    def normalize_mask(self, mask: np.ndarray, size: int = SIZE) -> np.ndarray:
        if mask.shape != (self.original_h, self.original_w):
            raise ValueError(
                f"mask shape {mask.shape} does not match image "
                f"{(self.original_h, self.original_w)}"
            )
        square = raster.pad_to_square(mask.astype(bool))
        return raster.resize_nearest(square, size, size)

    def denormalize_mask(self, mask: np.ndarray) -> np.ndarray:
        square = raster.resize_nearest(mask.astype(bool), self.side, self.side)
        return square[self.pad_top:self.pad_top + self.original_h,
                      self.pad_left:self.pad_left + self.original_w].copy()


@dataclass(frozen=True, eq=False)
class NormalizedImage:
    image: np.ndarray = field(repr=False)
    pad_info: PadInfo
    warnings: tuple[str, ...] = ()


def brightness_threshold(img: np.ndarray) -> float:
    """Nearest-rank 99th percentile of per-pixel R+G+B."""
    b = np.sort(img.sum(axis=2), axis=None)
    rank = math.ceil(REFLECTION_PERCENTILE / 100 * b.size)
    return float(b[max(rank, 1) - 1])


def remove_reflections(img: np.ndarray) -> np.ndarray:
    """Replace very bright pixels by the mean of their non-bright neighbours.

    Pixels brighter than 0.98 times the 99th brightness percentile are
    filled in repeated passes (at most 10); a pixel filled in one pass can
    donate in the next. Pixels that never get a donor keep their value.
    """
    out = img.astype(np.float64, copy=True)
    t = brightness_threshold(out)
    bright = out.sum(axis=2) > REFLECTION_FACTOR * t
    if not bright.any():
        return out

    padded = np.pad(out, ((1, 1), (1, 1), (0, 0)))
    donor = np.pad(~bright, 1)
    rows, cols = np.nonzero(bright)
    rows += 1
    cols += 1
    for _ in range(REFLECTION_MAX_PASSES):
        if rows.size == 0:
            break
        sums = np.zeros((rows.size, 3))
        counts = np.zeros(rows.size)
        for dr, dc in _NEIGHBOURS:
            ok = donor[rows + dr, cols + dc]
            sums += padded[rows + dr, cols + dc] * ok[:, None]
            counts += ok
        fill = counts > 0
        if not fill.any():
            break
        padded[rows[fill], cols[fill]] = sums[fill] / counts[fill, None]
        donor[rows[fill], cols[fill]] = True
        rows, cols = rows[~fill], cols[~fill]
    return padded[1:-1, 1:-1].copy()


def remove_hair(img: np.ndarray) -> np.ndarray:
    """Per-channel grayscale closing with disk(5) followed by a 3x3 median."""
    se = raster.disk(HAIR_RADIUS)
    out = np.empty(img.shape, dtype=np.float64)
    for c in range(img.shape[2]):
        out[..., c] = raster.median3x3(raster.grey_closing(img[..., c].astype(np.float64), se))
    return out


def white_balance(img: np.ndarray) -> np.ndarray:
    """Gray-world balance: rescale red and blue so all channel sums match green.

    If any channel sums to zero the image is returned unchanged and a
    :class:`ZeroChannelWarning` is emitted.
    """
    sums = img.reshape(-1, 3).sum(axis=0)
    if np.any(sums <= 0):
        warnings.warn(f"channel sums {sums.tolist()} include zero; white balance skipped",
                      ZeroChannelWarning, stacklevel=2)
        return img.astype(np.float64, copy=True)
    out = img.astype(np.float64, copy=True)
    out[..., 0] *= sums[1] / sums[0]
    out[..., 2] *= sums[1] / sums[2]
    return out


def normalize_geometry(img: np.ndarray, size: int = SIZE) -> tuple[np.ndarray, PadInfo]:
    h, w = img.shape[:2]
    info = PadInfo.for_size(w, h)
    return raster.resize_bilinear(raster.pad_to_square(img), size, size), info


def preprocess(img: np.ndarray) -> NormalizedImage:
    resized, info = normalize_geometry(img)
    cleaned = remove_hair(remove_reflections(resized))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ZeroChannelWarning)
        balanced = white_balance(cleaned)
    notes = tuple(str(w.message) for w in caught)
    for note in notes:
        warnings.warn(note, ZeroChannelWarning, stacklevel=2)
    return NormalizedImage(balanced, info, notes)
