"""Independent brute-force references the fast implementations are tested
against. Everything here favors obviousness over speed: per-pixel Python
loops, explicit set enumeration, no shared code with the package.
"""

from __future__ import annotations

import numpy as np

# Same published sRGB (D65) constants the package uses, but the math below
# is scalar and loop-based so a transcription bug on either side shows up.
_M = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_M_INV = np.linalg.inv(_M)
_WHITE = (0.95047, 1.0, 1.08883)
_EPS = (6.0 / 29.0) ** 3


def rgb_to_lab_scalar(r: float, g: float, b: float) -> tuple[float, float, float]:
    srgb = [r / 255.0, g / 255.0, b / 255.0]
    linear = [c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4 for c in srgb]
    xyz = [sum(_M[i][j] * linear[j] for j in range(3)) for i in range(3)]
    t = [xyz[i] / _WHITE[i] for i in range(3)]
    f = [v ** (1.0 / 3.0) if v > _EPS else v / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0 for v in t]
    return 116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])


def lab_to_rgb_scalar(lum: float, a: float, b: float) -> tuple[int, int, int]:
    fy = (lum + 16.0) / 116.0
    fx, fz = fy + a / 500.0, fy - b / 200.0
    def finv(t):
        return t ** 3 if t > 6.0 / 29.0 else 3.0 * (6.0 / 29.0) ** 2 * (t - 4.0 / 29.0)
    xyz = [_WHITE[0] * finv(fx), _WHITE[1] * finv(fy), _WHITE[2] * finv(fz)]
    linear = [sum(_M_INV[i][j] * xyz[j] for j in range(3)) for i in range(3)]
    srgb = [
        12.92 * c if c <= 0.0031308 else 1.055 * max(c, 0.0) ** (1.0 / 2.4) - 0.055
        for c in linear
    ]
    return tuple(int(np.clip(round(c * 255.0), 0, 255)) for c in srgb)


def brute_arms(data: np.ndarray, tau: float, l_max: int) -> dict[str, np.ndarray]:
    """Arm lengths by direct pixel-by-pixel growth of the color test."""
    arr = data if data.ndim == 3 else data[:, :, None]
    h, w = arr.shape[:2]
    out = {k: np.zeros((h, w), dtype=np.int64) for k in ("left", "right", "up", "down")}
    steps = {"left": (0, -1), "right": (0, 1), "up": (-1, 0), "down": (1, 0)}
    for y in range(h):
        for x in range(w):
            anchor = arr[y, x]
            for name, (dy, dx) in steps.items():
                n = 0
                for d in range(1, l_max + 1):
                    yy, xx = y + dy * d, x + dx * d
                    if not (0 <= yy < h and 0 <= xx < w):
                        break
                    if np.max(np.abs(arr[yy, xx] - anchor)) > tau:
                        break
                    n = d
                out[name][y, x] = n
    return out


def brute_region(arms: dict[str, np.ndarray], y: int, x: int) -> set[tuple[int, int]]:
    """Support region as a set: horizontal segments of the vertical arm."""
    pts = set()
    for qy in range(y - arms["up"][y, x], y + arms["down"][y, x] + 1):
        for qx in range(x - arms["left"][qy, x], x + arms["right"][qy, x] + 1):
            pts.add((qy, qx))
    return pts


def brute_aggregate(values: np.ndarray, arms: dict[str, np.ndarray]) -> np.ndarray:
    h, w = values.shape[:2]
    out = np.zeros(values.shape, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            for qy, qx in brute_region(arms, y, x):
                out[y, x] += values[qy, qx]
    return out


def brute_color_histogram(lab: np.ndarray, region: set[tuple[int, int]]) -> np.ndarray:
    """36-bin normalized Lab histogram of an explicit pixel set."""
    ranges = ((0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0))
    hist = np.zeros(36)
    for (y, x) in region:
        for c, (lo, hi) in enumerate(ranges):
            idx = int((lab[y, x, c] - lo) / (hi - lo) * 12)
            hist[c * 12 + min(max(idx, 0), 11)] += 1
    return hist / (3 * len(region))


def brute_om_histogram(
    ori: np.ndarray, mag: np.ndarray, gmax: float, y: int, x: int, half: int
) -> np.ndarray:
    """16-bin window histogram with replicated borders (clamped coords)."""
    h, w = ori.shape
    hist = np.zeros(16)
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            yy = min(max(y + dy, 0), h - 1)
            xx = min(max(x + dx, 0), w - 1)
            ob = min(int(ori[yy, xx] / np.pi * 8), 7)
            mb = min(int(mag[yy, xx] / gmax * 8), 7) if gmax > 0 else 0
            hist[ob] += 1
            hist[8 + mb] += 1
    return hist / (2.0 * (2 * half + 1) ** 2)


def brute_contrast(centroids: np.ndarray, counts: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    u = np.zeros(k)
    for i in range(k):
        for j in range(k):
            u[i] += counts[j] * np.linalg.norm(centroids[i] - centroids[j])
    return u


def brute_smooth(centroids: np.ndarray, u: np.ndarray, m: int) -> np.ndarray:
    k = centroids.shape[0]
    out = np.zeros(k)
    for i in range(k):
        dists = np.array([np.linalg.norm(centroids[i] - centroids[j]) for j in range(k)])
        near = np.argsort(dists, kind="stable")[:m]
        t = dists[near].sum()
        if t > 0:
            weights = t - dists[near]
            out[i] = (weights * u[near]).sum() / ((m - 1) * t)
        else:
            out[i] = u[near].mean()
    return out


def brute_filter(volume: np.ndarray, arms: dict[str, np.ndarray], sizes: np.ndarray) -> np.ndarray:
    """Region-weighted cost filtering by direct double loop."""
    h, w, levels = volume.shape
    out = np.zeros_like(volume)
    for y in range(h):
        for x in range(w):
            region = brute_region(arms, y, x)
            total = sum(sizes[qy, qx] for qy, qx in region)
            for s in range(levels):
                acc = sum(sizes[qy, qx] * volume[qy, qx, s] for qy, qx in region)
                out[y, x, s] = acc / total
    return out


def brute_filter_enumerated(
    volume: np.ndarray, arms: dict[str, np.ndarray], sizes: np.ndarray
) -> np.ndarray:
    """Same filtering oracle, but the per-region reduction uses numpy so
    the 32x32 acceptance sweep stays inside its runtime budget. Region
    membership still comes from explicit set enumeration.
    """
    h, w, _ = volume.shape
    out = np.zeros_like(volume)
    for y in range(h):
        for x in range(w):
            pts = np.array(sorted(brute_region(arms, y, x)))
            weights = sizes[pts[:, 0], pts[:, 1]]
            stack = volume[pts[:, 0], pts[:, 1], :]
            out[y, x] = (weights[:, None] * stack).sum(axis=0) / weights.sum()
    return out


def brute_region_sizes(arms: dict[str, np.ndarray]) -> np.ndarray:
    h, w = arms["left"].shape
    return np.array([[len(brute_region(arms, y, x)) for x in range(w)] for y in range(h)])


def brute_upsample(
    rows: np.ndarray,
    cols: np.ndarray,
    labels: np.ndarray,
    arms: dict[str, np.ndarray],
    sigma: float,
    normalized: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse-label interpolation by scanning every selected pixel's region.

    Returns (values, covered); pixels outside every region are left at 0
    and flagged uncovered, since their fallback is a nearest-pixel rule
    tested separately.
    """
    h, w = arms["left"].shape
    out = np.zeros((h, w))
    covered = np.zeros((h, w), dtype=bool)
    regions = [brute_region(arms, int(r), int(c)) for r, c in zip(rows, cols)]
    for y in range(h):
        for x in range(w):
            ws, vs = [], []
            for (r, c, lab), region in zip(zip(rows, cols, labels), regions):
                if (y, x) in region:
                    ws.append(np.exp(-np.hypot(y - r, x - c) / sigma))
                    vs.append(lab)
            if ws:
                covered[y, x] = True
                total = np.dot(ws, vs)
                out[y, x] = total / (sum(ws) if normalized else len(ws))
    return out, covered


def brute_pr_point(map255: np.ndarray, mask: np.ndarray, t: int) -> tuple[float, float]:
    pred = map255 >= t
    tp = int(np.logical_and(pred, mask == 1).sum())
    n_pred = int(pred.sum())
    n_pos = int((mask == 1).sum())
    precision = tp / n_pred if n_pred else 1.0
    return precision, tp / n_pos
