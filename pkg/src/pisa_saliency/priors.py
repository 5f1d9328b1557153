"""Per-cluster spatial priors: center preference and boundary exclusion.

A cluster is favored when its pixels sit near the image center and
penalized in proportion to how much of it overlaps the border frame. The
raw score is squashed through a thresholded exponential so that clusters
beyond the cut-off contribute nothing downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureClusterModel


@dataclass
class SpatialPriorParams:
    """Knobs of the prior; defaults match the full-resolution detector."""

    boundary_weight: float = 2.5e4
    falloff: float = 0.006
    cutoff: float = 30.0
    border_width: int = 10
    include_center: bool = True
    include_boundary: bool = True

    def __post_init__(self):
        if self.boundary_weight < 0 or self.falloff < 0 or self.cutoff < 0:
            raise ValueError("prior parameters must be non-negative")
        if self.border_width < 0:
            raise ValueError("border_width must be non-negative")


@dataclass
class PriorField:
    """Raw and modulated per-cluster priors; index by assignment for pixels."""

    raw: np.ndarray
    modulated: np.ndarray

    def per_pixel(self, assignment: np.ndarray) -> np.ndarray:
        return self.modulated[assignment]


def border_frame_size(dims: tuple[int, int], border_width: int) -> int:
    """Pixel count of the border frame of the given width."""
    h, w = dims
    return h * w - max(h - 2 * border_width, 0) * max(w - 2 * border_width, 0)


def raw_spatial_prior(
    model: FeatureClusterModel, dims: tuple[int, int], params: SpatialPriorParams
) -> np.ndarray:
    """Per-cluster raw prior: scaled mean squared center distance plus the
    weighted fraction of the border frame the cluster occupies.

    Pixel coordinates are scaled so the center term spans [0, 100]: squared
    distances are divided by the squared center-to-corner distance. The
    border term is boundary_weight times (cluster pixels inside the frame)
    divided by the frame size, not divided by the cluster size.
    """
    if model.positions is None:
        raise ValueError("cluster model carries no pixel positions")
    h, w = dims
    ys = model.positions[:, 0].astype(np.float64)
    xs = model.positions[:, 1].astype(np.float64)
    k = model.n_clusters

    raw = np.zeros(k, dtype=np.float64)
    if params.include_center:
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        half_diag_sq = cy * cy + cx * cx
        scale = 100.0 / half_diag_sq if half_diag_sq > 0 else 0.0
        sq = (ys - cy) ** 2 + (xs - cx) ** 2
        sums = np.bincount(model.assignment, weights=sq, minlength=k)
        raw += scale * sums / np.maximum(model.count, 1)
    if params.include_boundary and params.border_width > 0:
        bw = params.border_width
        in_frame = (ys < bw) | (ys >= h - bw) | (xs < bw) | (xs >= w - bw)
        hits = np.bincount(model.assignment, weights=in_frame.astype(np.float64), minlength=k)
        raw += params.boundary_weight * hits / border_frame_size(dims, bw)
    return raw


def modulate_prior(raw: np.ndarray, params: SpatialPriorParams) -> np.ndarray:
    """exp(-falloff * raw) below the cut-off, hard zero above it."""
    raw = np.asarray(raw, dtype=np.float64)
    return np.where(raw <= params.cutoff, np.exp(-params.falloff * raw), 0.0)


def spatial_prior(
    model: FeatureClusterModel, dims: tuple[int, int], params: SpatialPriorParams
) -> PriorField:
    """Convenience wrapper producing both the raw and modulated fields."""
    raw = raw_spatial_prior(model, dims, params)
    return PriorField(raw=raw, modulated=modulate_prior(raw, params))
