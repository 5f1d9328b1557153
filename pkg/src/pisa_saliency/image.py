"""Image containers, color conversion, median pre-smoothing and gradients.

Everything downstream consumes the types defined here: dense row-major
pixel grids (:class:`RasterImage`) and per-pixel gradient data
(:class:`GradientField`). Pixel data is kept as float64 throughout so the
8-bit similarity tests and the Lab math never hit unsigned wraparound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import median_filter

RGB = "RGB"
LAB = "Lab"
SCALAR = "Scalar"

# sRGB (D65, 2 degree observer) linear-RGB -> XYZ matrix and white point.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = np.array([0.95047, 1.0, 1.08883])

# Lab channel ranges used for histogram binning downstream.
LAB_RANGES = ((0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0))


@dataclass
class RasterImage:
    """Dense 2-D pixel grid: (H, W) scalar or (H, W, 3) color, row major."""

    data: np.ndarray
    color_space: str = RGB

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            if self.color_space != SCALAR:
                raise ValueError("single-channel images must be Scalar")
        elif self.data.ndim == 3 and self.data.shape[2] == 3:
            if self.color_space == SCALAR:
                raise ValueError("Scalar images must be single channel")
        else:
            raise ValueError(f"expected (H, W) or (H, W, 3) data, got {self.data.shape}")
        if self.data.size == 0:
            raise ValueError("empty image")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3


@dataclass
class GradientField:
    """Per-pixel gradient orientation in [0, pi) and non-negative magnitude."""

    orientation: np.ndarray
    magnitude: np.ndarray


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    """Round half away from zero (numpy's default rounds half to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def load_image(path) -> RasterImage:
    """Read a PNG/PPM/JPEG file as an 8-bit RGB image.

    Decoding failures are re-raised as OSError carrying the file path.
    """
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.float64)
    except OSError:
        raise
    except Exception as exc:  # Pillow raises assorted types for bad streams
        raise OSError(f"cannot decode image file: {path}") from exc
    return RasterImage(data, RGB)


def load_mask(path) -> np.ndarray:
    """Read a ground-truth mask as {0, 1}, thresholding grayscale at 128."""
    try:
        with Image.open(path) as im:
            gray = np.asarray(im.convert("L"), dtype=np.uint8)
    except OSError:
        raise
    except Exception as exc:
        raise OSError(f"cannot decode mask file: {path}") from exc
    return (gray >= 128).astype(np.uint8)


def save_gray_png(path, values: np.ndarray) -> None:
    """Write an array of values in [0, 255] as an 8-bit grayscale PNG."""
    arr = np.clip(np.asarray(values), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def median_filter_3x3(img: RasterImage) -> RasterImage:
    """3x3 median smoothing, per channel, borders handled by replication."""
    if img.channels != 3 or img.color_space != RGB:
        raise ValueError("median pre-smoothing expects an RGB image")
    out = np.empty_like(img.data)
    for c in range(3):
        out[:, :, c] = median_filter(img.data[:, :, c], size=3, mode="nearest")
    return RasterImage(out, RGB)


def rgb_to_lab(img: RasterImage) -> RasterImage:
    """Convert 8-bit sRGB (D65) to CIELAB: L in [0, 100], a/b in [-128, 127]."""
    if img.color_space != RGB:
        raise ValueError("rgb_to_lab expects an RGB image")
    srgb = img.data / 255.0
    linear = np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(t > eps, np.cbrt(t), t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[:, :, 0] = 116.0 * f[:, :, 1] - 16.0
    lab[:, :, 1] = 500.0 * (f[:, :, 0] - f[:, :, 1])
    lab[:, :, 2] = 200.0 * (f[:, :, 1] - f[:, :, 2])
    return RasterImage(lab, LAB)


def luminance(img: RasterImage) -> np.ndarray:
    """Rec.601 luma of an RGB image (plain copy for scalar input)."""
    if img.channels == 1:
        return img.data.copy()
    r, g, b = img.data[:, :, 0], img.data[:, :, 1], img.data[:, :, 2]
    return 0.299 * r + 0.587 * g + 0.114 * b


def compute_gradients(img: RasterImage) -> GradientField:
    """Central-difference gradients of the luminance, replicated borders.

    Orientation is stored unsigned (mod pi) so opposite edge directions
    fall into the same bin; zero-magnitude pixels get orientation 0.
    """
    lum = luminance(img)
    padded = np.pad(lum, 1, mode="edge")
    gx = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    gy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)
    orientation[magnitude == 0.0] = 0.0
    return GradientField(orientation, magnitude)
