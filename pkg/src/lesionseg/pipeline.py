"""Increasing-k region search, post-processing and mapping back to the
original image frame."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import raster
from .clustering import MIN_AREA, cluster_regions
from .errors import NoRegionsWarning
from .features import FeatureStats, center_color_stats, feature_vector, N_FEATURES
from .preprocess import NormalizedImage, preprocess
from .regression import ModelBundle

log = logging.getLogger(__name__)

CLOSE_RADIUS = 30
DILATE_RADIUS = 14

Scorer = Callable[[np.ndarray], np.ndarray]
Clusterer = Callable[..., Sequence[raster.Region]]


@dataclass(frozen=True)
class SegmentationConfig:
    k_start: int = 3
    k_max: int = 12
    improvement_tol: float = 1e-6
    seed: int = 0
    min_area: int = MIN_AREA

    def __post_init__(self):
        if not 1 <= self.k_start <= self.k_max:
            raise ValueError(f"need 1 <= k_start <= k_max, got {self.k_start}, {self.k_max}")
        if self.improvement_tol < 0:
            raise ValueError("improvement_tol must be >= 0")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")


@dataclass(frozen=True, eq=False)
class Candidate:
    region: raster.Region
    score: float
    k: int
    index: int

    def key(self):
        return (self.score, self.region.area, -self.region.cluster, -self.index)


@dataclass(frozen=True, eq=False)
class KStep:
    k: int
    regions: tuple[raster.Region, ...]
    features: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True, eq=False)
class SearchResult:
    steps: tuple[KStep, ...]
    best: Candidate | None

    @property
    def per_k_best(self) -> list[tuple[int, float | None]]:
        return [(s.k, float(s.scores.max()) if len(s.scores) else None) for s in self.steps]


@dataclass(frozen=True, eq=False)
class SegmentationOutcome:
    mask: np.ndarray = field(repr=False)
    best_score: float
    best_k: int | None
    per_k_best: list[tuple[int, float | None]]
    warnings: tuple[str, ...] = ()

    def diagnostics(self) -> dict:
        return {
            "best_score": self.best_score,
            "best_k": self.best_k,
            "per_k_best": [{"k": k, "score": s} for k, s in self.per_k_best],
            "warnings": list(self.warnings),
        }


def region_features(regions: Sequence[raster.Region], norm: NormalizedImage,
                    stats: FeatureStats) -> np.ndarray:
    if not regions:
        return np.empty((0, N_FEATURES))
    center = center_color_stats(norm)
    return np.array([feature_vector(r, norm, stats, center) for r in regions])


def search_regions(norm: NormalizedImage, stats: FeatureStats, scorer: Scorer,
                   cfg: SegmentationConfig, clusterer: Clusterer = cluster_regions) -> SearchResult:
    """Score regions for k = k_start, k_start + 1, ... until the best score stops improving.

    A round "improves" when its best region beats the running best by more
    than ``cfg.improvement_tol``. Rounds before the first region is found
    never stop the search. Equal scores prefer the larger region, then the
    lower cluster index, then the earlier region.
    """
    steps = []
    best: Candidate | None = None
    for k in range(cfg.k_start, cfg.k_max + 1):
        regions = tuple(clusterer(norm, k, cfg.seed, cfg.min_area))
        X = region_features(regions, norm, stats)
        scores = np.asarray(scorer(X), dtype=np.float64) if len(regions) else np.empty(0)
        steps.append(KStep(k, regions, X, scores))

        cands = [Candidate(r, float(s), k, i) for i, (r, s) in enumerate(zip(regions, scores))]
        here = max(cands, key=Candidate.key, default=None)
        log.debug("k=%d: %d regions, best %s", k, len(regions),
                  None if here is None else round(here.score, 6))
        if best is None:
            best = here
            continue
        improved = here is not None and here.score > best.score + cfg.improvement_tol
        if here is not None and here.score > best.score:
            best = here
        if not improved:
            break
    return SearchResult(tuple(steps), best)


def postprocess(mask: np.ndarray) -> np.ndarray:
    """Fill holes, close with disk(30), then dilate with disk(14)."""
    filled = raster.fill_holes(mask)
    closed = raster.closing(filled, raster.disk(CLOSE_RADIUS))
    return raster.dilate(closed, raster.disk(DILATE_RADIUS))


def segment_normalized(norm: NormalizedImage, scorer: Scorer, stats: FeatureStats,
                       cfg: SegmentationConfig = SegmentationConfig(),
                       clusterer: Clusterer = cluster_regions) -> SegmentationOutcome:
    result = search_regions(norm, stats, scorer, cfg, clusterer)
    info = norm.pad_info
    notes = list(norm.warnings)
    if result.best is None:
        msg = f"no region >= {cfg.min_area} px for k in [{cfg.k_start}, {cfg.k_max}]; returning full mask"
        warnings.warn(msg, NoRegionsWarning, stacklevel=2)
        notes.append(msg)
        full = np.ones((info.original_h, info.original_w), dtype=bool)
        return SegmentationOutcome(full, 0.0, None, result.per_k_best, tuple(notes))
    mask = postprocess(result.best.region.mask)
    return SegmentationOutcome(
        info.denormalize_mask(mask), result.best.score, result.best.k,
        result.per_k_best, tuple(notes),
    )


def segment(img: np.ndarray, bundle: ModelBundle,
            cfg: SegmentationConfig = SegmentationConfig(),
            scorer: Scorer | None = None,
            clusterer: Clusterer = cluster_regions) -> SegmentationOutcome:
    """Segment the lesion in an RGB image; the mask matches the input size."""
    norm = preprocess(img)
    return segment_normalized(norm, scorer or bundle.score, bundle.stats, cfg, clusterer)
