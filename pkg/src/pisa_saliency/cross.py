"""Shape-adaptive per-pixel support regions built from cross skeletons.

Every pixel p gets four arm lengths (left, right, up, down). An arm grows
away from p while the color test max_c |I_c(q) - I_c(p)| <= tau keeps
holding, stops at the first failing pixel, and is capped at l_max. The
support region of p is the union of the horizontal segments of all pixels
on p's vertical arm, which tiles the region into disjoint row intervals.
That structure makes exact region sums cheap: one horizontal interval-sum
pass using each row pixel's own left/right arms, then one vertical
interval-sum pass using p's up/down arms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import RasterImage


@dataclass
class CrossField:
    """Arm lengths per pixel, all (H, W) int32, measured in pixels from p."""

    left: np.ndarray
    right: np.ndarray
    up: np.ndarray
    down: np.ndarray
    tau: float
    l_max: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.shape


def _shift_ok(data: np.ndarray, oy: int, ox: int, tau: float) -> np.ndarray:
    """Mask of pixels whose neighbor at offset (oy, ox) passes the color test."""
    h, w = data.shape[:2]
    ok = np.zeros((h, w), dtype=bool)
    y0, y1 = max(0, -oy), min(h, h - oy)
    x0, x1 = max(0, -ox), min(w, w - ox)
    if y0 >= y1 or x0 >= x1:
        return ok
    diff = np.abs(data[y0:y1, x0:x1] - data[y0 + oy : y1 + oy, x0 + ox : x1 + ox])
    if diff.ndim == 3:
        diff = diff.max(axis=2)
    ok[y0:y1, x0:x1] = diff <= tau
    return ok


def _directional_arms(data: np.ndarray, tau: float, l_max: int, dy: int, dx: int) -> np.ndarray:
    h, w = data.shape[:2]
    arms = np.zeros((h, w), dtype=np.int32)
    alive = np.ones((h, w), dtype=bool)
    for d in range(1, l_max + 1):
        alive &= _shift_ok(data, dy * d, dx * d, tau)
        if not alive.any():
            break
        arms[alive] = d
    return arms


def build_cross_field(img: RasterImage, tau: float, l_max: int) -> CrossField:
    """Grow all four arm fields on an already median-smoothed RGB image."""
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    data = img.data
    return CrossField(
        left=_directional_arms(data, tau, l_max, 0, -1),
        right=_directional_arms(data, tau, l_max, 0, +1),
        up=_directional_arms(data, tau, l_max, -1, 0),
        down=_directional_arms(data, tau, l_max, +1, 0),
        tau=tau,
        l_max=l_max,
    )


def _interval_sums_axis1(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Per-pixel sums over [x - lo, x + hi] along rows via prefix sums."""
    h, w = values.shape[:2]
    pad_shape = (h, 1) + values.shape[2:]
    cs = np.concatenate(
        [np.zeros(pad_shape, dtype=np.float64), np.cumsum(values, axis=1, dtype=np.float64)],
        axis=1,
    )
    x = np.arange(w, dtype=np.int64)[None, :]
    upper = (x + hi + 1).astype(np.int64)
    lower = (x - lo).astype(np.int64)
    if values.ndim == 3:
        upper = upper[:, :, None]
        lower = lower[:, :, None]
    return np.take_along_axis(cs, upper, axis=1) - np.take_along_axis(cs, lower, axis=1)


def _interval_sums_axis0(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Per-pixel sums over [y - lo, y + hi] along columns via prefix sums."""
    h, w = values.shape[:2]
    pad_shape = (1, w) + values.shape[2:]
    cs = np.concatenate(
        [np.zeros(pad_shape, dtype=np.float64), np.cumsum(values, axis=0, dtype=np.float64)],
        axis=0,
    )
    y = np.arange(h, dtype=np.int64)[:, None]
    upper = (y + hi + 1).astype(np.int64)
    lower = (y - lo).astype(np.int64)
    if values.ndim == 3:
        upper = upper[:, :, None]
        lower = lower[:, :, None]
    return np.take_along_axis(cs, upper, axis=0) - np.take_along_axis(cs, lower, axis=0)


def aggregate_over_regions(values: np.ndarray, cross: CrossField) -> np.ndarray:
    """Sum `values` over each pixel's support region.

    Accepts (H, W) or (H, W, C) input; sums are exact for integer-valued
    float64 input as long as totals stay below 2**53.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[:2] != cross.shape:
        raise ValueError("values shape does not match cross field")
    row_sums = _interval_sums_axis1(values, cross.left, cross.right)
    return _interval_sums_axis0(row_sums, cross.up, cross.down)


def support_region_size(cross: CrossField) -> np.ndarray:
    """|support region| per pixel as float64 (always >= 1: p itself)."""
    hlen = (cross.left + cross.right + 1).astype(np.float64)
    return _interval_sums_axis0(hlen, cross.up, cross.down)


def support_mask(cross: CrossField, y: int, x: int) -> np.ndarray:
    """Boolean membership mask of one pixel's support region (test helper)."""
    h, w = cross.shape
    mask = np.zeros((h, w), dtype=bool)
    for yy in range(y - int(cross.up[y, x]), y + int(cross.down[y, x]) + 1):
        x0 = x - int(cross.left[yy, x])
        x1 = x + int(cross.right[yy, x])
        mask[yy, x0 : x1 + 1] = True
    return mask
