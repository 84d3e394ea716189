"""Dermoscopic skin-lesion segmentation by k-means color clustering and a
random-forest + SVR region scorer."""

__version__ = "0.1.0"

from .features import FeatureStats, build_feature_stats, feature_vector
from .pipeline import SegmentationConfig, SegmentationOutcome, postprocess, segment
from .preprocess import NormalizedImage, PadInfo, preprocess
from .regression import ModelBundle, ensemble_score, load_bundle, save_bundle
from .training import Corpus, evaluate, generate_samples, jaccard, naive_score, train

__all__ = [
    "Corpus", "FeatureStats", "ModelBundle", "NormalizedImage", "PadInfo",
    "SegmentationConfig", "SegmentationOutcome", "build_feature_stats", "ensemble_score",
    "evaluate", "feature_vector", "generate_samples", "jaccard", "load_bundle",
    "naive_score", "postprocess", "preprocess", "save_bundle", "segment", "train",
]
