"""Per-pixel appearance features, their quantization, and global contrast.

Two complementary descriptions are extracted for every pixel: a 36-d color
histogram (12 uniform bins per Lab channel) accumulated over the pixel's
shape-adaptive support region, and a 16-d structure histogram (8 gradient
orientation bins plus 8 gradient magnitude bins) accumulated over a fixed
square window. Each feature space is quantized by a seeded kmeans variant
whose cluster count adapts to the image, and per-cluster global contrast
is the size-weighted sum of histogram distances to all other clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cross import CrossField, aggregate_over_regions, support_region_size
from .image import GradientField, LAB_RANGES, RasterImage

COLOR_BINS_PER_CHANNEL = 12
OM_BINS_PER_HALF = 8


@dataclass
class FeatureClusterModel:
    """Hard partition of feature points with per-cluster summary statistics.

    `positions` carries the (row, col) image coordinate of every feature
    point so spatial priors can locate cluster members; it is None only in
    tests that never touch priors.
    """

    assignment: np.ndarray
    centroids: np.ndarray
    mean_color: np.ndarray | None
    count: np.ndarray
    positions: np.ndarray | None = None

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def pixel_positions(self) -> list[np.ndarray]:
        """Per-cluster (n_i, 2) coordinate arrays, cluster-index order."""
        if self.positions is None:
            raise ValueError("model built without positions")
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.count)[:-1]
        return np.split(self.positions[order], bounds)


@dataclass
class ClusterSaliency:
    """Per-cluster non-negative contrast values."""

    values: np.ndarray
    smoothed: bool = False


def _channel_bins(values: np.ndarray, lo: float, hi: float, n_bins: int) -> np.ndarray:
    idx = np.floor((values - lo) / (hi - lo) * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def _one_hot(idx: np.ndarray, n_bins: int) -> np.ndarray:
    return (idx[:, :, None] == np.arange(n_bins)).astype(np.float64)


def color_histograms(lab: RasterImage, cross: CrossField) -> np.ndarray:
    """36-d color histogram per pixel over its support region, sum 1.

    Counts are exact prefix-sum region sums of per-bin indicators; the
    normalizer is 3x the region size (one count per channel per pixel).
    """
    if lab.channels != 3:
        raise ValueError("color histograms need a 3-channel Lab image")
    h, w = lab.height, lab.width
    sizes = support_region_size(cross)
    out = np.empty((h, w, 3 * COLOR_BINS_PER_CHANNEL), dtype=np.float64)
    for c in range(3):
        lo, hi = LAB_RANGES[c]
        idx = _channel_bins(lab.data[:, :, c], lo, hi, COLOR_BINS_PER_CHANNEL)
        counts = aggregate_over_regions(_one_hot(idx, COLOR_BINS_PER_CHANNEL), cross)
        out[:, :, c * COLOR_BINS_PER_CHANNEL : (c + 1) * COLOR_BINS_PER_CHANNEL] = counts
    out /= 3.0 * sizes[:, :, None]
    return out


def _box_sums(planes: np.ndarray, half: int) -> np.ndarray:
    """Sliding-window sums over (2*half+1)^2 boxes with edge replication."""
    if half == 0:
        return planes.copy()
    padded = np.pad(planes, ((half, half), (half, half), (0, 0)), mode="edge")
    hp, wp = padded.shape[:2]
    ii = np.zeros((hp + 1, wp + 1, planes.shape[2]), dtype=np.float64)
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    win = 2 * half + 1
    return ii[win:, win:] - ii[:-win, win:] - ii[win:, :-win] + ii[:-win, :-win]


def om_histograms(grad: GradientField, window: int) -> np.ndarray:
    """16-d orientation/magnitude histogram per pixel over a square window.

    `window` is the odd box side in pixels. Orientation bins tile [0, pi);
    magnitude bins tile [0, per-image max]. Each 8-bin half is normalized
    to mass 1/2, so the full vector sums to 1. A zero-gradient image puts
    all magnitude mass in bin 0.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd pixel count")
    ori_idx = _channel_bins(grad.orientation, 0.0, np.pi, OM_BINS_PER_HALF)
    gmax = float(grad.magnitude.max())
    if gmax > 0.0:
        mag_idx = _channel_bins(grad.magnitude, 0.0, gmax, OM_BINS_PER_HALF)
    else:
        mag_idx = np.zeros_like(ori_idx)
    planes = np.concatenate(
        [_one_hot(ori_idx, OM_BINS_PER_HALF), _one_hot(mag_idx, OM_BINS_PER_HALF)], axis=2
    )
    counts = _box_sums(planes, window // 2)
    return counts / (2.0 * window * window)


def _composite_distances(
    hist: np.ndarray,
    lab: np.ndarray | None,
    cent_hist: np.ndarray,
    cent_lab: np.ndarray | None,
    gamma: float,
) -> np.ndarray:
    """(n, k) distances: hist L2 plus gamma-weighted Lab L2 of the anchors."""
    hn = np.einsum("ij,ij->i", hist, hist)
    cn = np.einsum("ij,ij->i", cent_hist, cent_hist)
    d2 = hn[:, None] - 2.0 * (hist @ cent_hist.T) + cn[None, :]
    dist = np.sqrt(np.maximum(d2, 0.0))
    if gamma > 0.0 and lab is not None and cent_lab is not None:
        ln = np.einsum("ij,ij->i", lab, lab)
        cln = np.einsum("ij,ij->i", cent_lab, cent_lab)
        l2 = ln[:, None] - 2.0 * (lab @ cent_lab.T) + cln[None, :]
        dist += (gamma / 100.0) * np.sqrt(np.maximum(l2, 0.0))
    return dist


def _nearest(
    hist: np.ndarray,
    lab: np.ndarray | None,
    cent_hist: np.ndarray,
    cent_lab: np.ndarray | None,
    gamma: float,
    chunk: int = 16384,
) -> tuple[np.ndarray, np.ndarray]:
    n = hist.shape[0]
    labels = np.empty(n, dtype=np.int32)
    dists = np.empty(n, dtype=np.float64)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        d = _composite_distances(
            hist[s:e], None if lab is None else lab[s:e], cent_hist, cent_lab, gamma
        )
        idx = np.argmin(d, axis=1)
        labels[s:e] = idx
        dists[s:e] = d[np.arange(e - s), idx]
    return labels, dists


def _column_means(values: np.ndarray, labels: np.ndarray, k: int, fallback: np.ndarray) -> np.ndarray:
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.empty((k, values.shape[1]), dtype=np.float64)
    for j in range(values.shape[1]):
        sums[:, j] = np.bincount(labels, weights=values[:, j], minlength=k)
    out = fallback.copy()
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


def cluster_features(
    histograms: np.ndarray,
    anchors_lab: np.ndarray | None,
    k0: int,
    coverage: float = 0.95,
    seed: int | tuple = 0,
    positions: np.ndarray | None = None,
    gamma: float = 0.5,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> FeatureClusterModel:
    """Quantize feature vectors by seeded kmeans with adaptive cluster count.

    Point-to-cluster distance is the histogram L2 distance plus, when
    `anchors_lab` is given, gamma/100 times the Lab distance between the
    point's own color and the cluster's mean color. Seeding is kmeans++;
    it stops early once every point coincides with a chosen centroid,
    which caps the cluster count by the number of distinct features.
    After convergence, clusters are sorted by size descending and the
    smallest prefix covering >= `coverage` of the points is kept; the
    remaining points move to their nearest kept centroid (centroids are
    not recomputed afterwards).
    """
    hist = np.ascontiguousarray(np.asarray(histograms, dtype=np.float64))
    if hist.ndim != 2:
        raise ValueError("histograms must be (n_points, n_bins)")
    n = hist.shape[0]
    if n == 0:
        raise ValueError("no feature points to cluster")
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    if not 0.0 < coverage <= 1.0:
        raise ValueError("coverage must be in (0, 1]")
    lab = None
    if anchors_lab is not None:
        lab = np.ascontiguousarray(np.asarray(anchors_lab, dtype=np.float64))
        if lab.shape != (n, 3):
            raise ValueError("anchors_lab must be (n_points, 3)")
    else:
        gamma = 0.0

    rng = np.random.default_rng(seed)
    k0 = min(k0, n)

    # kmeans++ seeding on the composite distance.
    chosen = [int(rng.integers(n))]
    cent_hist = hist[chosen]
    cent_lab = None if lab is None else lab[chosen]
    _, best = _nearest(hist, lab, cent_hist, cent_lab, gamma)
    while len(chosen) < k0:
        d2 = best * best
        total = d2.sum()
        if total <= 0.0:
            break
        idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        _, nd = _nearest(hist, lab, hist[idx : idx + 1], None if lab is None else lab[idx : idx + 1], gamma)
        np.minimum(best, nd, out=best)
    cent_hist = hist[chosen].copy()
    cent_lab = None if lab is None else lab[chosen].copy()
    k = len(chosen)

    labels = np.zeros(n, dtype=np.int32)
    for _ in range(max_iter):
        labels, _ = _nearest(hist, lab, cent_hist, cent_lab, gamma)
        new_hist = _column_means(hist, labels, k, cent_hist)
        new_lab = None if lab is None else _column_means(lab, labels, k, cent_lab)
        movement = np.linalg.norm(new_hist - cent_hist, axis=1)
        if lab is not None:
            movement = movement + (gamma / 100.0) * np.linalg.norm(new_lab - cent_lab, axis=1)
        cent_hist, cent_lab = new_hist, new_lab
        if movement.max() < tol:
            break
    labels, _ = _nearest(hist, lab, cent_hist, cent_lab, gamma)

    # Keep the smallest size-descending prefix covering the requested mass.
    counts = np.bincount(labels, minlength=k)
    order = np.argsort(-counts, kind="stable")
    cum = np.cumsum(counts[order])
    kept = order[: int(np.searchsorted(cum, coverage * n, side="left")) + 1]
    cent_hist = cent_hist[kept]
    cent_lab = None if cent_lab is None else cent_lab[kept]

    remap = np.full(k, -1, dtype=np.int32)
    remap[kept] = np.arange(len(kept), dtype=np.int32)
    new_labels = remap[labels]
    residual = new_labels < 0
    if residual.any():
        moved, _ = _nearest(
            hist[residual], None if lab is None else lab[residual], cent_hist, cent_lab, gamma
        )
        new_labels[residual] = moved

    return FeatureClusterModel(
        assignment=new_labels,
        centroids=cent_hist,
        mean_color=cent_lab,
        count=np.bincount(new_labels, minlength=len(kept)).astype(np.int64),
        positions=None if positions is None else np.asarray(positions),
    )


def _centroid_distances(centroids: np.ndarray) -> np.ndarray:
    # Difference form, not the expanded-dot rearrangement: K stays small
    # here and this keeps self-distances exactly zero with no cancellation.
    d2 = ((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    return np.sqrt(d2)


def contrast_measure(model: FeatureClusterModel) -> ClusterSaliency:
    """Global contrast per cluster: size-weighted histogram distances.

    U(i) = sum_j n_j * ||h_i - h_j||, so rare clusters that sit far from
    the big ones score high; a single-cluster model scores 0.
    """
    dist = _centroid_distances(model.centroids)
    # multiply-then-sum, not a matmul: BLAS may contract with FMA, which
    # rounds differently from the plain per-term products this measure is
    # checked against
    weighted = dist * model.count.astype(np.float64)[None, :]
    return ClusterSaliency(weighted.sum(axis=1), smoothed=False)


def smooth_cluster_saliency(model: FeatureClusterModel, u: ClusterSaliency, m: int) -> ClusterSaliency:
    """Average each cluster's contrast over its m nearest clusters.

    Neighbor j (centroid histogram distance d_j, self included at d = 0)
    gets weight T - d_j with T the summed neighbor distance, normalized by
    (m - 1) T; identical centroids (T = 0) fall back to uniform weights.
    """
    k = model.n_clusters
    if k == 1:
        return ClusterSaliency(u.values.copy(), smoothed=True)
    m = min(max(m, 2), k)
    dist = _centroid_distances(model.centroids)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :m]
    d = np.take_along_axis(dist, nearest, axis=1)
    t = d.sum(axis=1, keepdims=True)
    weights = np.where(t > 0.0, t - d, 1.0)
    norm = np.where(t > 0.0, (m - 1) * t, float(m))
    smoothed = (weights * u.values[nearest]).sum(axis=1) / norm[:, 0]
    return ClusterSaliency(smoothed, smoothed=True)
