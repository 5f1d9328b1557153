"""Benchmark protocol: PR curves, adaptive F-measure, MAE, dataset I/O.

Maps are first linearly rescaled to integers in [0, 255]; the PR curve
sweeps every threshold t in 0..255 with the rule "salient iff map >= t",
and the single-number F score uses the adaptive threshold of twice the
map mean. Reports serialize deterministically (repr floats) so repeated
runs with one seed produce byte-identical CSV files.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .image import load_image, load_mask, round_half_away

logger = logging.getLogger("pisa_saliency")

BETA_SQ = 0.3
N_THRESHOLDS = 256


@dataclass
class DatasetEntry:
    """One image/mask pair, matched by filename stem."""

    name: str
    image_path: Path
    mask_path: Path

    def load(self):
        return load_image(self.image_path), load_mask(self.mask_path)


@dataclass
class EvalRecord:
    """Metrics of one image; wallclock is filled by the caller that timed it."""

    name: str
    pr: np.ndarray
    threshold: float
    precision: float
    recall: float
    f_measure: float
    mae: float
    wallclock_ms: float = math.nan


@dataclass
class EvalReport:
    """Per-image records plus dataset-level aggregates."""

    records: list[EvalRecord] = field(default_factory=list)

    @property
    def mean_pr(self) -> np.ndarray:
        return np.mean([r.pr for r in self.records], axis=0)

    def aggregate(self) -> dict:
        agg = {
            "images": len(self.records),
            "mean_f_measure": float(np.mean([r.f_measure for r in self.records])),
            "mean_mae": float(np.mean([r.mae for r in self.records])),
            "mean_threshold": float(np.mean([r.threshold for r in self.records])),
            "average_precision": average_precision(self.mean_pr),
        }
        return agg

    def per_image_csv(self) -> str:
        lines = ["name,threshold,precision,recall,f_measure,mae"]
        for r in self.records:
            cells = [r.name] + [repr(float(v)) for v in
                                (r.threshold, r.precision, r.recall, r.f_measure, r.mae)]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def pr_csv(self) -> str:
        lines = ["threshold,precision,recall"]
        for t, (p, r) in enumerate(self.mean_pr):
            lines.append(f"{t},{repr(float(p))},{repr(float(r))}")
        return "\n".join(lines) + "\n"

    def aggregate_json(self, extra: dict | None = None) -> str:
        payload = self.aggregate()
        if extra:
            payload.update(extra)
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def max_min_normalize(values: np.ndarray) -> np.ndarray:
    """Linear rescale onto integers [0, 255]; a constant map becomes zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return np.zeros(v.shape, dtype=np.int64)
    return round_half_away((v - lo) / (hi - lo) * 255.0).astype(np.int64)


def _check_normalized(map255: np.ndarray) -> np.ndarray:
    m = np.asarray(map255)
    if m.min() < 0 or m.max() > 255:
        raise ValueError("saliency map must be normalized to [0, 255]")
    return m.astype(np.int64)


def pr_curve(map255: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """(256, 2) array of (precision, recall), one row per threshold.

    Precision at thresholds with no predicted pixels is 1 by convention;
    an empty ground-truth mask is rejected (recall undefined).
    """
    m = _check_normalized(map255).ravel()
    g = np.asarray(mask).astype(bool).ravel()
    if m.shape != g.shape:
        raise ValueError("map and mask sizes differ")
    n_pos = int(g.sum())
    if n_pos == 0:
        raise ValueError("empty ground-truth mask")
    pos_hist = np.bincount(m[g], minlength=N_THRESHOLDS)
    neg_hist = np.bincount(m[~g], minlength=N_THRESHOLDS)
    tp = np.cumsum(pos_hist[::-1])[::-1].astype(np.float64)
    predicted = tp + np.cumsum(neg_hist[::-1])[::-1]
    precision = np.where(predicted > 0, tp / np.maximum(predicted, 1.0), 1.0)
    recall = tp / n_pos
    return np.stack([precision, recall], axis=1)


def adaptive_threshold(map255: np.ndarray) -> float:
    """Twice the map mean, clamped to 255."""
    return min(2.0 * float(np.mean(map255)), 255.0)


def f_measure(precision: float, recall: float, beta_sq: float = BETA_SQ) -> float:
    """Precision-weighted F score; 0 when both inputs are 0."""
    denom = beta_sq * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + beta_sq) * precision * recall / denom


def mae(map01: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute difference between a [0,1] map and a binary mask."""
    s = np.asarray(map01, dtype=np.float64)
    g = np.asarray(mask, dtype=np.float64)
    if s.shape != g.shape:
        raise ValueError("map and mask sizes differ")
    return float(np.abs(s - g).mean())


def average_precision(pr: np.ndarray) -> float:
    """Trapezoidal area under precision as a function of recall.

    Points are sorted by recall and anchored at recall 0 with the
    precision of the smallest-recall point, so a perfect detector whose
    curve is the single point (1, 1) integrates to 1.
    """
    pr = np.asarray(pr, dtype=np.float64)
    order = np.argsort(pr[:, 1], kind="stable")
    p, r = pr[order, 0], pr[order, 1]
    p = np.concatenate([[p[0]], p])
    r = np.concatenate([[0.0], r])
    return float(np.trapezoid(p, r))


def binary_scores(map255: np.ndarray, mask: np.ndarray, threshold: float) -> tuple[float, float]:
    """(precision, recall) of the binarization map >= threshold."""
    m = _check_normalized(map255)
    g = np.asarray(mask).astype(bool)
    pred = m >= threshold
    tp = float(np.logical_and(pred, g).sum())
    n_pred = float(pred.sum())
    n_pos = float(g.sum())
    if n_pos == 0:
        raise ValueError("empty ground-truth mask")
    precision = tp / n_pred if n_pred > 0 else 1.0
    return precision, tp / n_pos


def evaluate_pair(
    saliency: np.ndarray, mask: np.ndarray, name: str = "", wallclock_ms: float = math.nan
) -> EvalRecord:
    """All metrics of one raw saliency map against its binary mask."""
    norm = max_min_normalize(saliency)
    curve = pr_curve(norm, mask)
    threshold = adaptive_threshold(norm)
    precision, recall = binary_scores(norm, mask, threshold)
    return EvalRecord(
        name=name,
        pr=curve,
        threshold=threshold,
        precision=precision,
        recall=recall,
        f_measure=f_measure(precision, recall),
        mae=mae(norm / 255.0, mask),
        wallclock_ms=wallclock_ms,
    )


def load_dataset(
    root, image_suffix: str = ".jpg", mask_suffix: str = ".png"
) -> list[DatasetEntry]:
    """Scan a directory of image/mask pairs matched by filename stem.

    Pairs with missing masks or mismatched dimensions are skipped with a
    warning; an empty result is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root is not a directory: {root}")
    entries: list[DatasetEntry] = []
    for image_path in sorted(root.glob(f"*{image_suffix}")):
        mask_path = image_path.with_suffix(mask_suffix)
        if mask_path == image_path:
            raise ValueError("image and mask suffixes must differ")
        if not mask_path.is_file():
            logger.warning("no mask for %s, skipped", image_path.name)
            continue
        try:
            with Image.open(image_path) as im, Image.open(mask_path) as mk:
                if im.size != mk.size:
                    logger.warning(
                        "dimension mismatch for %s (%s vs %s), skipped",
                        image_path.name, im.size, mk.size,
                    )
                    continue
        except OSError as exc:
            logger.warning("unreadable pair %s: %s", image_path.name, exc)
            continue
        entries.append(DatasetEntry(image_path.stem, image_path, mask_path))
    if not entries:
        raise ValueError(f"no usable image/mask pairs under {root}")
    return entries
