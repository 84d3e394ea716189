"""Forest + SVR averaging and the on-disk model bundle."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, VersionMismatch
from ..features import FeatureStats
from .forest import ForestModel, Tree
from .svr import SvrModel

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelBundle:
    forest: ForestModel
    svr: SvrModel
    stats: FeatureStats
    format_version: int = FORMAT_VERSION

    def score(self, X) -> np.ndarray:
        """Mean of forest and SVR predictions, clamped to [0, 1]."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.clip((self.forest.predict(X) + self.svr.predict(X)) / 2.0, 0.0, 1.0)


def ensemble_score(bundle: ModelBundle, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = bundle.score(x)
    return float(out[0]) if x.ndim == 1 else out


def _payload(bundle: ModelBundle) -> dict:
    return {
        "forest": {
            "seed": bundle.forest.seed,
            "n_features": bundle.forest.n_features,
            "trees": [t.to_dict() for t in bundle.forest.trees],
        },
        "svr": bundle.svr.to_dict(),
        "stats": bundle.stats.to_dict(),
    }


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps_bundle(bundle: ModelBundle) -> str:
    body = _canonical(_payload(bundle))
    doc = {
        "format_version": bundle.format_version,
        "checksum": hashlib.sha256(body.encode()).hexdigest(),
        "payload": json.loads(body),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def loads_bundle(text: str, source: str = "<string>") -> ModelBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{source}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "payload" not in doc:
        raise CorruptFile(f"{source}: missing payload")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{source}: format_version {version!r}, expected {FORMAT_VERSION}")
    payload = doc["payload"]
    digest = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    if digest != doc.get("checksum"):
        raise CorruptFile(f"{source}: checksum mismatch")
    try:
        forest = ForestModel(
            tuple(Tree.from_dict(t) for t in payload["forest"]["trees"]),
            int(payload["forest"]["seed"]),
            int(payload["forest"]["n_features"]),
        )
        svr = SvrModel.from_dict(payload["svr"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{source}: malformed model ({exc})") from exc
    return ModelBundle(forest, svr, FeatureStats.from_dict(payload["stats"]), version)


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    Path(path).write_text(dumps_bundle(bundle))


def load_bundle(path: str | Path) -> ModelBundle:
    return loads_bundle(Path(path).read_text(), str(path))
