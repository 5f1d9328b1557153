"""Command-line front end: detect, eval, and bench subcommands.

Every pipeline parameter is reachable three ways with fixed precedence:
variant defaults < config file < command-line flags. Image-level work is
fanned out over a thread pool; outputs are always written in input order
so runs with the same seed are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import NORMALIZATIONS, RunConfig
from .evaluate import EvalReport, evaluate_pair, load_dataset, max_min_normalize
from .image import load_image, save_gray_png
from .solver import run_detector

logger = logging.getLogger("pisa_saliency")

# argparse dest -> RunConfig field, for plain value overrides.
_VALUE_FLAGS = (
    "tau",
    "l_max",
    "levels",
    "boundary_weight",
    "falloff",
    "prior_cutoff",
    "border_width",
    "color_weight",
    "k0_color",
    "k0_om",
    "coverage",
    "seed",
    "threads",
)


def _add_config_flags(parser: argparse.ArgumentParser, include_normalization_all: bool = False):
    parser.add_argument("--config", type=Path, help="key=value config file")
    parser.add_argument("--variant", choices=("pisa", "fpisa"))
    parser.add_argument("--tau", type=float, help="cross arm color tolerance")
    parser.add_argument("--l-max", dest="l_max", type=int, help="maximum arm length")
    parser.add_argument("--levels", type=int, help="saliency level count")
    parser.add_argument("--boundary-weight", dest="boundary_weight", type=float)
    parser.add_argument("--falloff", type=float, help="prior exponential fall-off")
    parser.add_argument("--prior-cutoff", dest="prior_cutoff", type=float)
    parser.add_argument("--border-width", dest="border_width", type=int)
    parser.add_argument("--sigma", type=str, help="upsample length scale or 'auto'")
    parser.add_argument("--color-weight", dest="color_weight", type=float)
    parser.add_argument("--k0-color", dest="k0_color", type=int)
    parser.add_argument("--k0-om", dest="k0_om", type=int)
    parser.add_argument("--coverage", type=float)
    choices = NORMALIZATIONS + ("all",) if include_normalization_all else NORMALIZATIONS
    parser.add_argument("--normalization", choices=choices)
    parser.add_argument("--no-cc", action="store_true", help="disable the color route")
    parser.add_argument("--no-sc", action="store_true", help="disable the structure route")
    parser.add_argument("--no-center", action="store_true", help="disable the center prior")
    parser.add_argument("--no-boundary", action="store_true", help="disable the boundary prior")
    parser.add_argument("--normalized-upsample", action="store_true")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)


def _build_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = RunConfig.load(args.config)
        if args.variant and args.variant != cfg.variant:
            cfg = cfg.replace(variant=args.variant)
    else:
        cfg = RunConfig.for_variant(args.variant or "pisa")
    overrides = {}
    for name in _VALUE_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "sigma", None) is not None:
        overrides["sigma"] = None if args.sigma == "auto" else float(args.sigma)
    normalization = getattr(args, "normalization", None)
    if normalization is not None and normalization != "all":
        overrides["normalization"] = normalization
    if getattr(args, "no_cc", False):
        overrides["use_cc"] = False
    if getattr(args, "no_sc", False):
        overrides["use_sc"] = False
    if getattr(args, "no_center", False):
        overrides["use_center"] = False
    if getattr(args, "no_boundary", False):
        overrides["use_boundary"] = False
    if getattr(args, "normalized_upsample", False):
        overrides["normalized_upsample"] = True
    cfg = cfg.replace(**overrides)
    cfg.validate()
    return cfg


def _detect_one(path: Path, cfg: RunConfig):
    """(map, wallclock_ms); exceptions bubble to the caller."""
    img = load_image(path)
    start = time.perf_counter()
    saliency = run_detector(img, cfg)
    return saliency, (time.perf_counter() - start) * 1000.0


def cmd_detect(args) -> int:
    cfg = _build_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [Path(p) for p in args.images]

    def work(path: Path):
        try:
            saliency, ms = _detect_one(path, cfg)
            return saliency, ms, None
        except Exception as exc:  # per-file isolation: one bad input != abort
            return None, 0.0, str(exc)

    with ThreadPoolExecutor(max_workers=cfg.resolve_threads()) as pool:
        results = list(pool.map(work, paths))

    manifest = {"config_sha256": cfg.digest(), "variant": cfg.variant,
                "seed": cfg.seed, "images": []}
    failures = 0
    for path, (saliency, ms, error) in zip(paths, results):
        entry: dict = {"input": str(path)}
        if error is None:
            out_path = out_dir / f"{path.stem}.png"
            save_gray_png(out_path, max_min_normalize(saliency))
            entry["output"] = str(out_path)
            entry["wallclock_ms"] = ms
        else:
            entry["error"] = error
            failures += 1
            logger.error("%s: %s", path, error)
        manifest["images"].append(entry)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 1 if failures else 0


def _eval_runs(args, cfg: RunConfig) -> list[tuple[str, RunConfig]]:
    """The (label, config) list a single eval invocation expands into."""
    ablate = getattr(args, "ablate", None)
    norm_all = getattr(args, "normalization", None) == "all"
    if ablate and norm_all:
        raise ValueError("--ablate and --normalization all cannot be combined")
    if ablate == "priors":
        return [
            ("cp_be", cfg.replace(use_center=True, use_boundary=True)),
            ("cp_only", cfg.replace(use_center=True, use_boundary=False)),
            ("be_only", cfg.replace(use_center=False, use_boundary=True)),
            ("no_prior", cfg.replace(use_center=False, use_boundary=False)),
        ]
    if ablate == "features":
        return [
            ("cc_sc", cfg.replace(use_cc=True, use_sc=True)),
            ("cc_only", cfg.replace(use_cc=True, use_sc=False)),
            ("sc_only", cfg.replace(use_cc=False, use_sc=True)),
        ]
    if norm_all:
        return [(m, cfg.replace(normalization=m)) for m in NORMALIZATIONS]
    return [("", cfg)]


def _run_eval(entries, cfg: RunConfig, out_dir: Path) -> tuple[int, int]:
    """Evaluate one config over the dataset; returns (evaluated, failed)."""
    def work(entry):
        try:
            img, mask = entry.load()
            start = time.perf_counter()
            saliency = run_detector(img, cfg)
            ms = (time.perf_counter() - start) * 1000.0
            return evaluate_pair(saliency, mask, entry.name, ms), None
        except Exception as exc:
            return None, f"{entry.name}: {exc}"

    with ThreadPoolExecutor(max_workers=cfg.resolve_threads()) as pool:
        results = list(pool.map(work, entries))

    report = EvalReport()
    failures = []
    for record, error in results:
        if error is None:
            report.records.append(record)
        else:
            failures.append(error)
            logger.warning("skipped %s", error)
    if not report.records:
        raise ValueError("no image evaluated successfully")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "per_image.csv").write_text(report.per_image_csv())
    (out_dir / "pr_curve.csv").write_text(report.pr_csv())
    timings = {
        "mean_wallclock_ms": float(np.mean([r.wallclock_ms for r in report.records])),
        "config_sha256": cfg.digest(),
        "failures": failures,
    }
    (out_dir / "aggregate.json").write_text(report.aggregate_json(extra=timings))
    return len(report.records), len(failures)


def cmd_eval(args) -> int:
    cfg = _build_config(args)
    entries = load_dataset(args.dataset, args.image_suffix, args.mask_suffix)
    runs = _eval_runs(args, cfg)
    out_root = Path(args.out)
    failed = 0
    for label, run_cfg in runs:
        out_dir = out_root / label if label else out_root
        _, n_failed = _run_eval(entries, run_cfg, out_dir)
        failed += n_failed
    return 1 if failed else 0


def cmd_bench(args) -> int:
    paths = [Path(p) for p in args.images]
    totals: dict[str, float] = {}
    stage_means: dict[str, dict[str, float]] = {}
    for variant in ("pisa", "fpisa"):
        args.variant = variant
        cfg = _build_config(args)
        stage_acc: dict[str, float] = {}
        elapsed = 0.0
        for _ in range(args.repeat):
            for path in paths:
                img = load_image(path)
                timings: dict[str, float] = {}
                start = time.perf_counter()
                run_detector(img, cfg, timings)
                elapsed += time.perf_counter() - start
                for stage, seconds in timings.items():
                    stage_acc[stage] = stage_acc.get(stage, 0.0) + seconds
        n = len(paths) * args.repeat
        totals[variant] = elapsed / n
        stage_means[variant] = {k: v / n for k, v in stage_acc.items()}

    print(f"{'variant':8} {'stage':12} {'mean_ms':>10}")
    for variant in ("pisa", "fpisa"):
        for stage, seconds in stage_means[variant].items():
            print(f"{variant:8} {stage:12} {seconds * 1000.0:10.2f}")
        print(f"{variant:8} {'total':12} {totals[variant] * 1000.0:10.2f}")
    ratio = totals["pisa"] / totals["fpisa"] if totals["fpisa"] > 0 else float("inf")
    print(f"wall-clock ratio pisa/fpisa: {ratio:.2f}x")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pisa-saliency",
        description="Salient-object detection by aggregated contrast with "
        "edge-preserving label assignment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="write saliency maps for images")
    p_detect.add_argument("images", nargs="+", help="input image paths")
    p_detect.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p_detect)
    p_detect.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("eval", help="score a dataset of image/mask pairs")
    p_eval.add_argument("dataset", help="directory of images and masks")
    p_eval.add_argument("--out", required=True, help="report output directory")
    p_eval.add_argument("--image-suffix", default=".jpg")
    p_eval.add_argument("--mask-suffix", default=".png")
    p_eval.add_argument("--ablate", choices=("priors", "features"))
    _add_config_flags(p_eval, include_normalization_all=True)
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="time both variants on images")
    p_bench.add_argument("images", nargs="+", help="input image paths")
    p_bench.add_argument("--repeat", type=int, default=1)
    _add_config_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
