"""Pixelwise salient-object detection with an evaluation harness.

Public API: the detector entry points, the configuration record, and the
benchmark metrics.
"""

from .config import RunConfig
from .evaluate import (
    EvalRecord,
    EvalReport,
    adaptive_threshold,
    average_precision,
    evaluate_pair,
    f_measure,
    load_dataset,
    mae,
    max_min_normalize,
    pr_curve,
)
from .image import RasterImage, load_image, load_mask, save_gray_png
from .solver import run_detector, run_fpisa, run_pisa

__all__ = [
    "EvalRecord",
    "EvalReport",
    "RasterImage",
    "RunConfig",
    "adaptive_threshold",
    "average_precision",
    "evaluate_pair",
    "f_measure",
    "load_dataset",
    "load_image",
    "load_mask",
    "mae",
    "max_min_normalize",
    "pr_curve",
    "run_detector",
    "run_fpisa",
    "run_pisa",
    "save_gray_png",
]

__version__ = "0.1.0"
