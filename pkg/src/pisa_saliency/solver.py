"""Saliency labeling: confidence aggregation, cost volume, and fast path.

The full-resolution path turns the two contrast measures into a discrete
per-pixel confidence level, builds a quadratic cost volume over the label
set, smooths each label slice with the support-region weighted filter, and
picks the cheapest label per pixel. The fast path runs the same stages on
one max-gradient pixel per 3x3 tile and interpolates the sparse labels
back to full resolution through the shared support-region geometry.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .config import RunConfig
from .cross import CrossField, aggregate_over_regions, build_cross_field, support_region_size
from .features import (
    cluster_features,
    color_histograms,
    contrast_measure,
    om_histograms,
    smooth_cluster_saliency,
)
from .image import (
    RasterImage,
    compute_gradients,
    median_filter_3x3,
    rgb_to_lab,
    round_half_away,
)
from .priors import SpatialPriorParams, spatial_prior


class PipelineError(RuntimeError):
    """Stage failure wrapper so callers see which stage blew up."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage


@contextmanager
def _stage(name: str, timings: dict | None):
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc
    finally:
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + (time.perf_counter() - start)


@dataclass
class ConfidenceField:
    """Raw aggregated confidence and its discrete level form."""

    f_hat: np.ndarray
    f: np.ndarray


@dataclass
class SubsampleGrid:
    """One selected pixel per 3x3 tile: coordinates plus source values."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    tile_shape: tuple[int, int]

    @property
    def n_points(self) -> int:
        return self.rows.shape[0]


def aggregate_confidence(
    uc: np.ndarray, dc: np.ndarray, ug: np.ndarray, dg: np.ndarray
) -> np.ndarray:
    """Combine the prior-modulated color and structure contrasts."""
    return uc * dc + ug * dg


def normalize_confidence(f_hat: np.ndarray, levels: int, method: str = "sigmoid") -> np.ndarray:
    """Map raw confidence onto integer levels {0, ..., levels-1}.

    All four methods are monotone non-decreasing; a constant input maps
    every pixel to the middle level. The sigmoid variant standardizes the
    input first since raw confidences scale with image size.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    f_hat = np.asarray(f_hat, dtype=np.float64)
    top = float(levels - 1)
    mid = np.full_like(f_hat, round_half_away(top / 2.0))

    if method == "sigmoid":
        std = f_hat.std()
        if std == 0.0:
            return mid.astype(np.int64)
        z = (f_hat - f_hat.mean()) / std
        scaled = top / (1.0 + np.exp(-z))
    elif method in ("max-min", "log", "exp"):
        lo, hi = f_hat.min(), f_hat.max()
        if hi == lo:
            return mid.astype(np.int64)
        u = (f_hat - lo) / (hi - lo)
        if method == "max-min":
            scaled = top * u
        elif method == "log":
            scaled = top * np.log1p((np.e - 1.0) * u)
        else:
            scaled = top * (np.exp(u) - 1.0) / (np.e - 1.0)
    else:
        raise ValueError(f"unknown normalization method: {method!r}")
    return np.clip(round_half_away(scaled), 0, top).astype(np.int64)


def build_cost_volume(f: np.ndarray, levels: int) -> np.ndarray:
    """Quadratic label costs: cost of level s at p is (s - f(p))^2."""
    f = np.asarray(f, dtype=np.float64)
    s = np.arange(levels, dtype=np.float64)
    return (s - f[..., None]) ** 2


def filter_cost_volume(volume: np.ndarray, cross: CrossField, sizes: np.ndarray) -> np.ndarray:
    """Support-region weighted average of costs, per label slice.

    Each contributing pixel k inside the region is weighted by its own
    region size, normalized over the region; both numerator and
    denominator reduce to one prefix-sum aggregation pass.
    """
    num = aggregate_over_regions(sizes[:, :, None] * volume, cross)
    den = aggregate_over_regions(sizes, cross)
    return num / den[:, :, None]


def wta_select(volume: np.ndarray) -> np.ndarray:
    """Cheapest label per pixel; ties go to the lower level."""
    return np.argmin(volume, axis=-1).astype(np.int64)


def _resolve_sigma(config: RunConfig, dims: tuple[int, int]) -> float:
    if config.sigma is not None:
        if config.sigma <= 0:
            raise ValueError("sigma must be positive")
        return config.sigma
    h, w = dims
    return 0.1 * float(np.hypot((h - 1) / 2.0, (w - 1) / 2.0))


def _prior_params(config: RunConfig) -> SpatialPriorParams:
    return SpatialPriorParams(
        boundary_weight=config.boundary_weight,
        falloff=config.falloff,
        cutoff=config.prior_cutoff,
        border_width=config.border_width,
        include_center=config.use_center,
        include_boundary=config.use_boundary,
    )


def _route_confidence(
    hist: np.ndarray,
    anchors_lab: np.ndarray | None,
    k0: int,
    gamma: float,
    seed: tuple,
    positions: np.ndarray,
    dims: tuple[int, int],
    config: RunConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """One feature route: cluster, contrast, smooth, prior; per-point U, D."""
    model = cluster_features(
        hist,
        anchors_lab,
        k0,
        coverage=config.coverage,
        seed=seed,
        positions=positions,
        gamma=gamma,
    )
    contrast = contrast_measure(model)
    m = max(2, int(round_half_away(model.n_clusters / 4.0)))
    contrast = smooth_cluster_saliency(model, contrast, m)
    prior = spatial_prior(model, dims, _prior_params(config))
    return contrast.values[model.assignment], prior.per_pixel(model.assignment)


def _confidence_at_points(
    color_hist: np.ndarray,
    om_hist: np.ndarray,
    lab_points: np.ndarray,
    positions: np.ndarray,
    dims: tuple[int, int],
    config: RunConfig,
) -> ConfidenceField:
    n = color_hist.shape[0]
    zeros = np.zeros(n, dtype=np.float64)
    uc = dc = ug = dg = zeros
    if config.use_cc:
        uc, dc = _route_confidence(
            color_hist,
            lab_points,
            config.k0_color,
            config.color_weight,
            (config.seed, 0),
            positions,
            dims,
            config,
        )
    if config.use_sc:
        ug, dg = _route_confidence(
            om_hist, None, config.k0_om, 0.0, (config.seed, 1), positions, dims, config
        )
    f_hat = aggregate_confidence(uc, dc, ug, dg)
    f = normalize_confidence(f_hat, config.levels, config.normalization)
    return ConfidenceField(f_hat=f_hat, f=f)


def _grid_positions(h: int, w: int) -> np.ndarray:
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return np.stack([ys.ravel(), xs.ravel()], axis=1)


def run_pisa(img: RasterImage, config: RunConfig, timings: dict | None = None) -> np.ndarray:
    """Full-resolution detector; returns an (H, W) integer level map."""
    config.validate()
    h, w = img.height, img.width
    with _stage("preprocess", timings):
        smooth = median_filter_3x3(img)
        lab = rgb_to_lab(smooth)
        grad = compute_gradients(smooth)
    with _stage("cross", timings):
        cross = build_cross_field(smooth, config.tau, config.l_max)
        sizes = support_region_size(cross)
    with _stage("features", timings):
        color_hist = color_histograms(lab, cross).reshape(h * w, -1)
        om_hist = om_histograms(grad, 2 * config.l_max + 1).reshape(h * w, -1)
    with _stage("confidence", timings):
        conf = _confidence_at_points(
            color_hist,
            om_hist,
            lab.data.reshape(h * w, 3),
            _grid_positions(h, w),
            (h, w),
            config,
        )
        f = conf.f.reshape(h, w)
    with _stage("labeling", timings):
        volume = build_cost_volume(f, config.levels)
        filtered = filter_cost_volume(volume, cross, sizes)
        return wta_select(filtered)


def subsample_max_gradient(img: RasterImage, grad) -> SubsampleGrid:
    """Pick the max-gradient pixel of every non-overlapping 3x3 tile.

    Ragged edge tiles are padded with -1 magnitude so real pixels always
    win; ties resolve to the smallest row-major index inside the tile.
    """
    mag = grad.magnitude
    h, w = mag.shape
    th, tw = -(-h // 3), -(-w // 3)
    padded = np.full((th * 3, tw * 3), -1.0)
    padded[:h, :w] = mag
    tiles = padded.reshape(th, 3, tw, 3).transpose(0, 2, 1, 3).reshape(th, tw, 9)
    flat = tiles.argmax(axis=2)
    rows = (np.arange(th)[:, None] * 3 + flat // 3).ravel()
    cols = (np.arange(tw)[None, :] * 3 + flat % 3).ravel()
    return SubsampleGrid(
        rows=rows, cols=cols, values=img.data[rows, cols], tile_shape=(th, tw)
    )


def _shifted(arr: np.ndarray, oy: int, ox: int, fill) -> np.ndarray:
    """arr sampled at p + (oy, ox), out-of-bounds cells set to `fill`."""
    out = np.full(arr.shape, fill, dtype=arr.dtype)
    h, w = arr.shape[:2]
    y0, y1 = max(0, -oy), min(h, h - oy)
    x0, x1 = max(0, -ox), min(w, w - ox)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = arr[y0 + oy : y1 + oy, x0 + ox : x1 + ox]
    return out


def upsample_saliency(
    grid: SubsampleGrid,
    levels: np.ndarray,
    cross: CrossField,
    sigma: float,
    weight_normalized: bool = False,
) -> np.ndarray:
    """Spread sparse labels to full resolution through support regions.

    Pixel p averages the labels of every selected pixel whose support
    region contains p, each weighted by exp(-distance/sigma). The default
    divides the weighted sum by the plain covering count; the normalized
    variant divides by the weight sum instead. Uncovered pixels copy the
    nearest selected pixel's label.
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.size == 0:
        raise ValueError("no sparse labels to upsample")
    if levels.shape[0] != grid.n_points:
        raise ValueError("labels do not match the subsample grid")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w = cross.shape
    anchor = np.zeros((h, w), dtype=bool)
    anchor[grid.rows, grid.cols] = True
    value = np.zeros((h, w), dtype=np.float64)
    value[grid.rows, grid.cols] = levels

    reach = cross.l_max
    num = np.zeros((h, w), dtype=np.float64)
    den = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.int64)
    # p sits in the region of the selected pixel k = p + (dy, dx) iff k's
    # vertical arm reaches p's row and the spine pixel q = (py, px + dx)
    # has horizontal arms spanning p's column.
    horiz = {}
    for dx in range(-reach, reach + 1):
        left_q = _shifted(cross.left, 0, dx, -1)
        right_q = _shifted(cross.right, 0, dx, -1)
        horiz[dx] = (dx <= left_q) & (-dx <= right_q)
    for dy in range(-reach, reach + 1):
        up_k = _shifted(cross.up, dy, 0, -1)
        down_k = _shifted(cross.down, dy, 0, -1)
        available = _shifted(anchor, dy, 0, False) & (dy <= up_k) & (-dy <= down_k)
        value_row = _shifted(value, dy, 0, 0.0)
        for dx in range(-reach, reach + 1):
            cover = _shifted(available, 0, dx, False) & horiz[dx]
            weight = float(np.exp(-np.hypot(dy, dx) / sigma))
            vals = _shifted(value_row, 0, dx, 0.0)
            num += np.where(cover, weight * vals, 0.0)
            den += np.where(cover, weight, 0.0)
            count += cover
    divisor = den if weight_normalized else count.astype(np.float64)
    out = np.divide(num, divisor, out=np.zeros((h, w)), where=count > 0)
    if (count == 0).any():
        idx = distance_transform_edt(~anchor, return_distances=False, return_indices=True)
        out = np.where(count > 0, out, value[idx[0], idx[1]])
    return out


def run_fpisa(img: RasterImage, config: RunConfig, timings: dict | None = None) -> np.ndarray:
    """Fast-path detector; returns an (H, W) float map on the level scale.

    Cross arms and feature histograms come from the full-resolution
    image, but clustering, priors, confidence, and labeling only see the
    selected sparse pixels; the dense map is interpolated at the end.
    """
    config.validate()
    h, w = img.height, img.width
    with _stage("preprocess", timings):
        smooth = median_filter_3x3(img)
        lab = rgb_to_lab(smooth)
        grad = compute_gradients(smooth)
    with _stage("cross", timings):
        cross = build_cross_field(smooth, config.tau, config.l_max)
        sizes = support_region_size(cross)
    with _stage("subsample", timings):
        grid = subsample_max_gradient(img, grad)
        rows, cols = grid.rows, grid.cols
    with _stage("features", timings):
        color_hist = color_histograms(lab, cross)[rows, cols]
        om_hist = om_histograms(grad, 2 * config.l_max + 1)[rows, cols]
    with _stage("confidence", timings):
        conf = _confidence_at_points(
            color_hist,
            om_hist,
            lab.data[rows, cols],
            np.stack([rows, cols], axis=1),
            (h, w),
            config,
        )
    with _stage("labeling", timings):
        volume = build_cost_volume(conf.f, config.levels)
        anchor_sizes = sizes[rows, cols]
        num_grid = np.zeros((h, w, config.levels), dtype=np.float64)
        num_grid[rows, cols] = anchor_sizes[:, None] * volume
        den_grid = np.zeros((h, w), dtype=np.float64)
        den_grid[rows, cols] = anchor_sizes
        num = aggregate_over_regions(num_grid, cross)[rows, cols]
        den = aggregate_over_regions(den_grid, cross)[rows, cols]
        sparse_levels = wta_select(num / den[:, None])
    with _stage("upsample", timings):
        sigma = _resolve_sigma(config, (h, w))
        return upsample_saliency(
            grid, sparse_levels, cross, sigma, config.normalized_upsample
        )


def run_detector(img: RasterImage, config: RunConfig, timings: dict | None = None) -> np.ndarray:
    """Dispatch on config.variant."""
    if config.variant == "fpisa":
        return run_fpisa(img, config, timings)
    return run_pisa(img, config, timings)
