"""Training-sample generation, model training and corpus evaluation."""
from __future__ import annotations

import csv
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import raster
from .clustering import cluster_regions
from .errors import DimensionMismatch, EmptyCorpus, LesionSegError, NoSamples
from .features import FeatureStats, stats_from_normalized
from .pipeline import Clusterer, SegmentationConfig, search_regions, segment
from .preprocess import NormalizedImage, preprocess
from .regression import ModelBundle, train_forest, train_svr

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff")
DEFAULT_MASK_SUFFIX = "_segmentation"


@dataclass(frozen=True, eq=False)
class TrainingSample:
    features: np.ndarray
    target: float


def samples_to_arrays(samples: Sequence[TrainingSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        return np.empty((0, 10)), np.empty(0)
    return (np.array([s.features for s in samples]),
            np.array([s.target for s in samples], dtype=np.float64))


@dataclass
class Corpus:
    """Paired images and ground-truth masks.

    Entries are ``(image, mask)`` pairs of file paths or in-memory arrays;
    files are read on demand.
    """

    entries: list = field(default_factory=list)

    @classmethod
    def from_dirs(cls, images: str | Path, masks: str | Path,
                  mask_suffix: str = DEFAULT_MASK_SUFFIX) -> "Corpus":
        images, masks = Path(images), Path(masks)
        if not images.is_dir():
            raise EmptyCorpus(f"image directory {images} does not exist")
        entries = []
        for path in sorted(images.iterdir()):
            if path.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            mask = masks / f"{path.stem}{mask_suffix}.png"
            if not mask.exists():
                log.warning("no mask for %s (expected %s); skipped", path.name, mask.name)
                continue
            entries.append((path, mask))
        return cls(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def name(self, i: int) -> str:
        img = self.entries[i][0]
        return Path(img).stem if isinstance(img, (str, Path)) else f"#{i}"

    def load(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return load_pair(self.entries[i])


def load_pair(entry) -> tuple[np.ndarray, np.ndarray]:
    img, mask = entry
    if isinstance(img, (str, Path)):
        img = raster.load_image(img)
    if isinstance(mask, (str, Path)):
        mask = raster.load_mask(mask)
    img = np.asarray(img, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if img.shape[:2] != mask.shape:
        raise DimensionMismatch(f"image {img.shape[:2]} vs mask {mask.shape}")
    return img, mask


def prepare(entry) -> tuple[NormalizedImage, np.ndarray]:
    """Preprocessed image plus its ground truth mapped into 1024x1024 space."""
    img, mask = load_pair(entry)
    norm = preprocess(img)
    return norm, norm.pad_info.normalize_mask(mask)


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """|a & b| / |a | b|; two empty masks count as identical."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def region_jaccard(region: raster.Region, truth: np.ndarray, truth_area: int | None = None) -> float:
    if region.shape != truth.shape:
        raise DimensionMismatch(f"region frame {region.shape} vs mask {truth.shape}")
    if truth_area is None:
        truth_area = int(np.count_nonzero(truth))
    inter = int(np.count_nonzero(truth[region.bbox] & region.crop))
    return inter / (region.area + truth_area - inter)


def naive_score(x) -> float | np.ndarray:
    """Sum of the ten feature values."""
    x = np.asarray(x, dtype=np.float64)
    return x.sum(axis=-1) if x.ndim > 1 else float(x.sum())


def samples_for_image(norm: NormalizedImage, truth: np.ndarray, stats: FeatureStats,
                      cfg: SegmentationConfig,
                      clusterer: Clusterer = cluster_regions) -> list[TrainingSample]:
    """One sample per region visited by the k-loop driven by the naive score."""
    result = search_regions(norm, stats, naive_score, cfg, clusterer)
    area = int(np.count_nonzero(truth))
    samples = []
    for step in result.steps:
        for region, x in zip(step.regions, step.features):
            samples.append(TrainingSample(x, region_jaccard(region, truth, area)))
    return samples


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Ordered map, optionally across worker processes."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _safe_prepare(entry):
    try:
        return prepare(entry)
    except (OSError, ValueError, LesionSegError) as exc:
        log.warning("skipping %s: %s", entry[0] if isinstance(entry[0], (str, Path)) else "entry", exc)
        return None


def _samples_job(args):
    entry, prepared, stats, cfg = args
    try:
        norm, truth = prepared if prepared is not None else prepare(entry)
        return samples_for_image(norm, truth, stats, cfg)
    except (OSError, ValueError, LesionSegError) as exc:
        log.warning("sample generation failed: %s", exc)
        return []


def generate_samples(corpus: Corpus, stats: FeatureStats,
                     cfg: SegmentationConfig = SegmentationConfig(),
                     jobs: int = 1, prepared: Sequence | None = None) -> list[TrainingSample]:
    """Samples from every image, concatenated in corpus order."""
    if len(corpus) == 0:
        raise EmptyCorpus("corpus is empty")
    prepared = prepared if prepared is not None else [None] * len(corpus)
    jobs_in = [(e, p, stats, cfg) for e, p in zip(corpus.entries, prepared)]
    out: list[TrainingSample] = []
    for part in _map(_samples_job, jobs_in, jobs):
        out.extend(part)
    return out


def train(corpus: Corpus, cfg: SegmentationConfig = SegmentationConfig(), seed: int = 0,
          jobs: int = 1) -> ModelBundle:
    """Corpus statistics, naive-score samples, then forest and SVR."""
    if len(corpus) == 0:
        raise EmptyCorpus("corpus is empty")
    prepared = _map(_safe_prepare, corpus.entries, jobs)
    usable = [(e, p) for e, p in zip(corpus.entries, prepared) if p is not None]
    if not usable:
        raise EmptyCorpus("no readable image/mask pairs")
    stats = stats_from_normalized(p for _, p in usable)
    log.info("feature stats built from %d images", len(usable))

    samples = generate_samples(Corpus([e for e, _ in usable]), stats, cfg, jobs,
                               prepared=[p for _, p in usable])
    if not samples:
        raise NoSamples("no regions were generated from the corpus")
    X, y = samples_to_arrays(samples)
    log.info("training on %d samples", len(y))
    forest = train_forest(X, y, seed=seed)
    svr = train_svr(X, y)
    return ModelBundle(forest, svr, stats)


@dataclass
class EvalReport:
    names: list[str]
    scores: list[float]
    errors: list[str | None]

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores)) if self.scores else 0.0

    @property
    def median(self) -> float:
        return float(statistics.median(self.scores)) if self.scores else 0.0

    def to_dict(self) -> dict:
        return {
            "mean_jaccard": self.mean,
            "median_jaccard": self.median,
            "images": [
                {"name": n, "jaccard": s, "error": e}
                for n, s, e in zip(self.names, self.scores, self.errors)
            ],
        }

    def write(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["name", "jaccard", "error"])
                for n, s, e in zip(self.names, self.scores, self.errors):
                    w.writerow([n, repr(s), e or ""])
        else:
            path.write_text(json.dumps(self.to_dict(), indent=2))


Segmenter = Callable[[np.ndarray], np.ndarray]


def _eval_job(args):
    entry, bundle, cfg, segmenter = args
    try:
        img, truth = load_pair(entry)
        pred = segmenter(img) if segmenter else segment(img, bundle, cfg).mask
        return jaccard(pred, truth), None
    except Exception as exc:  # recorded per image, never fatal
        return 0.0, f"{type(exc).__name__}: {exc}"


def evaluate(corpus: Corpus, bundle: ModelBundle | None,
             cfg: SegmentationConfig = SegmentationConfig(),
             segmenter: Segmenter | None = None, jobs: int = 1) -> EvalReport:
    """Jaccard of each predicted mask against ground truth at original size."""
    items = [(e, bundle, cfg, segmenter) for e in corpus.entries]
    results = _map(_eval_job, items, jobs if segmenter is None else 1)
    names = [corpus.name(i) for i in range(len(corpus))]
    for name, (_, err) in zip(names, results):
        if err:
            log.warning("%s: %s", name, err)
    return EvalReport(names, [s for s, _ in results], [e for _, e in results])


def iter_pairs(corpus: Corpus) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    for i in range(len(corpus)):
        yield corpus.load(i)
