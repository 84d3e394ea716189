"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Settings resolve as command-line flags, then ``--config`` JSON, then defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from PIL import UnidentifiedImageError

from . import __version__, raster
from .clustering import cluster_masks
from .errors import LesionSegError
from .features import FORMAT_VERSION as STATS_VERSION, build_feature_stats
from .pipeline import SegmentationConfig, segment
from .preprocess import preprocess
from .regression import load_bundle, save_bundle
from .regression.ensemble import FORMAT_VERSION as MODEL_VERSION
from .training import DEFAULT_MASK_SUFFIX, Corpus, evaluate, iter_pairs, train

log = logging.getLogger("lesionseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    seed: int = 0
    k_start: int = 3
    k_max: int = 12
    improvement_tol: float = 1e-6
    min_area: int = 256
    mask_suffix: str = DEFAULT_MASK_SUFFIX
    log_level: str = "WARNING"

    def segmentation(self) -> SegmentationConfig:
        return SegmentationConfig(self.k_start, self.k_max, self.improvement_tol, self.seed,
                                  self.min_area)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = asdict(RunConfig())
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(doc) - set(values)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    try:
        cfg.segmentation()
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _add_common(p: argparse.ArgumentParser, segmentation: bool = True) -> None:
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--log-level", dest="log_level",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--seed", type=int)
    if segmentation:
        p.add_argument("--k-start", dest="k_start", type=int)
        p.add_argument("--k-max", dest="k_max", type=int)
        p.add_argument("--improvement-tol", dest="improvement_tol", type=float)
        p.add_argument("--min-area", dest="min_area", type=int)


def _add_corpus(p: argparse.ArgumentParser) -> None:
    p.add_argument("--images", required=True, type=Path)
    p.add_argument("--masks", required=True, type=Path)
    p.add_argument("--mask-suffix", dest="mask_suffix")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lesionseg", description="Dermoscopic lesion segmentation.")
    parser.add_argument("--version", action="version",
                        version=f"lesionseg {__version__} (model format {MODEL_VERSION}, "
                                f"stats format {STATS_VERSION})")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("preprocess", help="write the normalized 1024x1024 image")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    _add_common(p, segmentation=False)

    p = sub.add_parser("cluster", help="write per-cluster masks after cleanup")
    p.add_argument("input", type=Path)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out-dir", type=Path, default=Path("."))
    _add_common(p, segmentation=False)

    p = sub.add_parser("stats", help="compute feature statistics from a corpus")
    _add_corpus(p)
    p.add_argument("--out", required=True, type=Path)
    _add_common(p, segmentation=False)

    p = sub.add_parser("train", help="train the regression ensemble")
    _add_corpus(p)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("segment", help="segment one image")
    p.add_argument("image", type=Path)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--diagnostics", type=Path)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a model on a labelled corpus")
    _add_corpus(p)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--report", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("demo-data", help="write a synthetic image/mask corpus")
    p.add_argument("directory", type=Path)
    p.add_argument("-n", type=int, default=40)
    _add_common(p, segmentation=False)
    return parser


def _corpus(args, cfg: RunConfig) -> Corpus:
    return Corpus.from_dirs(args.images, args.masks, cfg.mask_suffix)


def cmd_preprocess(args, cfg):
    norm = preprocess(raster.load_image(args.input))
    raster.save_image(args.output, norm.image)
    sidecar = args.output.with_suffix(".json")
    info = norm.pad_info
    sidecar.write_text(json.dumps({
        "original_w": info.original_w, "original_h": info.original_h,
        "pad_left": info.pad_left, "pad_top": info.pad_top, "side": info.side,
        "warnings": list(norm.warnings),
    }, indent=2))


def cmd_cluster(args, cfg):
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    norm = preprocess(raster.load_image(args.input))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for j, mask in enumerate(cluster_masks(norm, args.k, cfg.seed)):
        raster.save_mask(args.out_dir / f"{args.input.stem}_k{args.k}_c{j}.png", mask)


def cmd_stats(args, cfg):
    stats = build_feature_stats(iter_pairs(_corpus(args, cfg)))
    stats.save(args.out)


def cmd_train(args, cfg):
    bundle = train(_corpus(args, cfg), cfg.segmentation(), cfg.seed, jobs=args.jobs)
    save_bundle(bundle, args.out)


def cmd_segment(args, cfg):
    bundle = load_bundle(args.model)
    outcome = segment(raster.load_image(args.image), bundle, cfg.segmentation())
    raster.save_mask(args.out, outcome.mask)
    if args.diagnostics:
        args.diagnostics.write_text(json.dumps(outcome.diagnostics(), indent=2))


def cmd_eval(args, cfg):
    bundle = load_bundle(args.model)
    report = evaluate(_corpus(args, cfg), bundle, cfg.segmentation(), jobs=args.jobs)
    report.write(args.report)
    log.info("mean Jaccard %.4f, median %.4f", report.mean, report.median)


def cmd_demo_data(args, cfg):
    from .synthetic import write_corpus
    write_corpus(args.directory, args.n, cfg.seed)


COMMANDS = {
    "preprocess": cmd_preprocess,
    "cluster": cmd_cluster,
    "stats": cmd_stats,
    "train": cmd_train,
    "segment": cmd_segment,
    "eval": cmd_eval,
    "demo-data": cmd_demo_data,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        parser.print_help(sys.stderr)
        print(f"lesionseg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=cfg.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if getattr(args, "jobs", 1) < 1:
        print("lesionseg: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"lesionseg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LesionSegError, OSError, UnidentifiedImageError) as exc:
        print(f"lesionseg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
