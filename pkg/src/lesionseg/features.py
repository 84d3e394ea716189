"""Corpus statistics and the ten region features, each in [0, 1].

Vector order: area, position, circularity, solidity, color_r, color_g,
color_b, center_r, center_g, center_b. Model files depend on this order.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import preprocess as pp
from .errors import EmptyCorpus, VersionMismatch, CorruptFile
from .raster import Region

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
N_BINS = 500
AREA_MAX = pp.SIZE * pp.SIZE
FALLBACK_COV = np.diag([128.0 ** 2, 128.0 ** 2])
FEATURE_NAMES = (
    "area", "position", "circularity", "solidity",
    "color_r", "color_g", "color_b", "center_r", "center_g", "center_b",
)
N_FEATURES = len(FEATURE_NAMES)


class EmptyMaskWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class FeatureStats:
    area_hist: np.ndarray
    centroid_mean: np.ndarray
    centroid_cov: np.ndarray
    color_mean: np.ndarray
    color_std: np.ndarray

    def to_dict(self) -> dict:
        return {
            "area_hist": self.area_hist.tolist(),
            "centroid_mean": self.centroid_mean.tolist(),
            "centroid_cov": self.centroid_cov.tolist(),
            "color_mean": self.color_mean.tolist(),
            "color_std": self.color_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureStats":
        try:
            stats = cls(
                area_hist=np.asarray(d["area_hist"], dtype=np.float64),
                centroid_mean=np.asarray(d["centroid_mean"], dtype=np.float64),
                centroid_cov=np.asarray(d["centroid_cov"], dtype=np.float64),
                color_mean=np.asarray(d["color_mean"], dtype=np.float64),
                color_std=np.asarray(d["color_std"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"malformed feature stats: {exc}") from exc
        if (stats.area_hist.shape != (N_BINS,) or stats.centroid_mean.shape != (2,)
                or stats.centroid_cov.shape != (2, 2) or stats.color_mean.shape != (3,)
                or stats.color_std.shape != (3,)):
            raise CorruptFile("feature stats arrays have wrong shapes")
        return stats

    def save(self, path: str | Path) -> None:
        doc = {"format_version": FORMAT_VERSION, **self.to_dict()}
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "FeatureStats":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise CorruptFile(f"{path}: {exc}") from exc
        if doc.get("format_version") != FORMAT_VERSION:
            raise VersionMismatch(
                f"{path}: format_version {doc.get('format_version')!r}, expected {FORMAT_VERSION}")
        return cls.from_dict(doc)


def area_bin(area: int) -> int:
    return min(int(area) * N_BINS // AREA_MAX, N_BINS - 1)


def mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    rows, cols = np.nonzero(mask)
    return float(cols.mean()), float(rows.mean())


def fit_stats(areas, centroids, colors) -> FeatureStats:
    """Build stats from per-lesion areas, (x, y) centroids and mean colors."""
    areas = np.asarray(areas)
    if areas.size == 0:
        raise EmptyCorpus("no non-empty lesion masks")
    counts = np.bincount([area_bin(a) for a in areas], minlength=N_BINS).astype(np.float64)
    hist = counts / counts.max()

    cents = np.asarray(centroids, dtype=np.float64).reshape(-1, 2)
    mean = cents.mean(axis=0)
    cov = FALLBACK_COV.copy()
    if len(cents) > 1:
        sample = np.cov(cents, rowvar=False, ddof=1)
        if np.all(np.isfinite(sample)) and np.all(np.linalg.eigvalsh(sample) > 1e-9):
            cov = sample

    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    std = colors.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return FeatureStats(hist, mean, cov, colors.mean(axis=0), std)


def stats_from_normalized(items: Iterable[tuple[pp.NormalizedImage, np.ndarray]]) -> FeatureStats:
    """Statistics over (preprocessed image, 1024x1024 ground-truth mask) pairs."""
    areas, cents, colors = [], [], []
    seen = 0
    for i, (norm, mask) in enumerate(items):
        seen += 1
        area = int(mask.sum())
        if area == 0:
            warnings.warn(f"corpus entry {i}: empty ground-truth mask skipped", EmptyMaskWarning)
            continue
        areas.append(area)
        cents.append(mask_centroid(mask))
        colors.append(norm.image[mask].mean(axis=0))
    if seen == 0:
        raise EmptyCorpus("corpus is empty")
    return fit_stats(areas, cents, colors)


def build_feature_stats(corpus: Iterable[tuple[np.ndarray, np.ndarray]]) -> FeatureStats:
    """Preprocess each (image, mask) pair and gather lesion statistics."""
    def normalized():
        for img, mask in corpus:
            norm = pp.preprocess(img)
            yield norm, norm.pad_info.normalize_mask(mask)
    return stats_from_normalized(normalized())


# ------------------------------------------------------------------ features

def _gaussian(value, mean, std):
    z = (np.asarray(value, dtype=np.float64) - mean) / std
    return np.exp(-0.5 * z * z)


def area_feature(area: int, stats: FeatureStats) -> float:
    return float(stats.area_hist[area_bin(area)])


def position_feature(centroid, stats: FeatureStats) -> float:
    d = np.asarray(centroid, dtype=np.float64) - stats.centroid_mean
    m2 = float(d @ np.linalg.solve(stats.centroid_cov, d))
    return math.exp(-0.5 * max(m2, 0.0))


def circularity(region: Region) -> float:
    """4*pi*A / p**2 capped at 1; a lone pixel (p == 0) counts as circular."""
    if region.perimeter <= 0:
        return 1.0
    return min(1.0, 4.0 * math.pi * region.area / region.perimeter ** 2)


def solidity(region: Region) -> float:
    return region.area / region.convex_area


def region_mean_color(region: Region, img) -> np.ndarray:
    pixels = img.image if isinstance(img, pp.NormalizedImage) else img
    return region.pixels(pixels).mean(axis=0)


def color_features(region: Region, img, stats: FeatureStats) -> np.ndarray:
    return _gaussian(region_mean_color(region, img), stats.color_mean, stats.color_std)


def central_block(size: int = pp.SIZE) -> slice:
    return slice(size // 3, -(-2 * size // 3))


def center_color_stats(img) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std over the central ninth of the image."""
    pixels = img.image if isinstance(img, pp.NormalizedImage) else img
    h, w = pixels.shape[:2]
    block = pixels[central_block(h), central_block(w)].reshape(-1, 3)
    std = block.std(axis=0)
    return block.mean(axis=0), np.where(std > 0, std, 1.0)


def center_similarity_features(region: Region, img, center=None) -> np.ndarray:
    mu, sigma = center if center is not None else center_color_stats(img)
    return _gaussian(region_mean_color(region, img), mu, sigma)


def feature_vector(region: Region, img, stats: FeatureStats, center=None) -> np.ndarray:
    """The ten features of ``region``; pass ``center`` to reuse block stats."""
    if center is None:
        center = center_color_stats(img)
    mean_color = region_mean_color(region, img)
    out = np.empty(N_FEATURES)
    out[0] = area_feature(region.area, stats)
    out[1] = position_feature(region.centroid, stats)
    out[2] = circularity(region)
    out[3] = solidity(region)
    out[4:7] = _gaussian(mean_color, stats.color_mean, stats.color_std)
    out[7:10] = _gaussian(mean_color, center[0], center[1])
    return out
