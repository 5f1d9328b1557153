"""Image containers, color conversion, median smoothing, gradients."""

import numpy as np
import pytest

from pisa_saliency.image import (
    GradientField,
    RasterImage,
    compute_gradients,
    load_image,
    load_mask,
    median_filter_3x3,
    rgb_to_lab,
    round_half_away,
    save_gray_png,
)

from oracles import lab_to_rgb_scalar, rgb_to_lab_scalar

# Frozen reference conversions, computed with an independent scalar oracle
# before the package existed.
LAB_REFERENCE = {
    (0, 0, 0): (0.0, 0.0, 0.0),
    (255, 255, 255): (100.000004, -0.000017, 0.000007),
    (255, 0, 0): (53.240794, 80.092460, 67.203197),
    (0, 255, 0): (87.734722, -86.182716, 83.179321),
    (0, 0, 255): (32.297011, 79.187520, -107.860162),
    (128, 128, 128): (53.585016, -0.000010, 0.000004),
    (200, 60, 30): (46.456975, 53.996066, 48.031954),
}


def rgb_image(pixels) -> RasterImage:
    return RasterImage(np.asarray(pixels, dtype=np.float64))


class TestRasterImage:
    def test_shape_accessors(self):
        img = rgb_image(np.zeros((4, 6, 3)))
        assert (img.height, img.width, img.channels) == (4, 6, 3)

    def test_scalar_tag_required(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4)), "RGB")

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4, 2)))
        with pytest.raises(ValueError):
            RasterImage(np.zeros((0, 4, 3)))


class TestRoundHalfAway:
    def test_halves_go_away_from_zero(self):
        assert round_half_away(11.5) == 12
        assert round_half_away(-11.5) == -12
        assert round_half_away(0.5) == 1

    def test_matches_plain_rounding_elsewhere(self):
        x = np.array([0.2, 0.7, -0.2, -0.7, 3.49])
        assert np.array_equal(round_half_away(x), [0, 1, 0, -1, 3])


class TestMedianFilter:
    def test_constant_unchanged(self):
        img = rgb_image(np.full((5, 5, 3), 77.0))
        assert np.array_equal(median_filter_3x3(img).data, img.data)

    def test_center_spike_removed(self):
        plane = np.full((3, 3), 5.0)
        plane[1, 1] = 200.0
        img = rgb_image(np.stack([plane] * 3, axis=-1))
        assert median_filter_3x3(img).data[1, 1, 0] == 5.0

    def test_center_of_ramp_unchanged(self):
        plane = np.arange(1.0, 10.0).reshape(3, 3)
        img = rgb_image(np.stack([plane] * 3, axis=-1))
        assert median_filter_3x3(img).data[1, 1, 0] == 5.0

    def test_idempotent_on_constant(self):
        img = rgb_image(np.full((4, 4, 3), 13.0))
        once = median_filter_3x3(img)
        twice = median_filter_3x3(once)
        assert np.array_equal(once.data, twice.data)


class TestRgbToLab:
    @pytest.mark.parametrize("rgb,expected", sorted(LAB_REFERENCE.items()))
    def test_reference_colors(self, rgb, expected):
        img = rgb_image(np.full((1, 1, 3), rgb, dtype=np.float64))
        lab = rgb_to_lab(img)
        assert lab.color_space == "Lab"
        np.testing.assert_allclose(lab.data[0, 0], expected, atol=5e-6)

    def test_matches_scalar_oracle_on_random_colors(self):
        rng = np.random.default_rng(11)
        colors = rng.integers(0, 256, size=(40, 3))
        img = rgb_image(colors.reshape(1, 40, 3).astype(np.float64))
        lab = rgb_to_lab(img).data[0]
        for i, (r, g, b) in enumerate(colors):
            np.testing.assert_allclose(
                lab[i], rgb_to_lab_scalar(r, g, b), atol=1e-9
            )

    def test_round_trip_within_one_unit(self):
        rng = np.random.default_rng(23)
        colors = rng.integers(0, 256, size=(1000, 3))
        img = rgb_image(colors.reshape(1, -1, 3).astype(np.float64))
        lab = rgb_to_lab(img).data[0]
        back = np.array([lab_to_rgb_scalar(*lab[i]) for i in range(len(colors))])
        assert np.abs(back - colors).max() <= 1

    def test_output_ranges(self):
        rng = np.random.default_rng(3)
        img = rgb_image(rng.integers(0, 256, size=(8, 8, 3)).astype(np.float64))
        lab = rgb_to_lab(img).data
        assert lab[:, :, 0].min() >= 0 and lab[:, :, 0].max() <= 100.000005
        assert lab[:, :, 1:].min() >= -128 and lab[:, :, 1:].max() <= 127


class TestGradients:
    def test_constant_image(self):
        grad = compute_gradients(rgb_image(np.full((5, 5, 3), 9.0)))
        assert np.all(grad.magnitude == 0)
        assert np.all(grad.orientation == 0)

    def test_horizontal_step_edge(self):
        plane = np.zeros((5, 6))
        plane[:, 3:] = 100.0
        img = rgb_image(np.stack([plane] * 3, axis=-1))
        grad = compute_gradients(img)
        assert np.all(grad.magnitude[:, 2] == 50.0)
        assert np.all(grad.magnitude[:, 3] == 50.0)
        assert np.all(grad.orientation[:, 2] == 0.0)

    def test_linear_ramp_magnitude(self):
        xs = np.arange(7, dtype=np.float64)
        plane = np.tile(2.0 * xs, (5, 1))
        grad = compute_gradients(RasterImage(plane, "Scalar"))
        assert np.all(grad.magnitude[:, 1:-1] == 2.0)

    def test_magnitude_invariant_to_constant_shift(self):
        rng = np.random.default_rng(5)
        plane = rng.uniform(0, 200, size=(6, 7))
        a = compute_gradients(RasterImage(plane, "Scalar"))
        b = compute_gradients(RasterImage(plane + 31.0, "Scalar"))
        np.testing.assert_allclose(a.magnitude, b.magnitude, atol=1e-9)

    def test_orientation_range(self):
        rng = np.random.default_rng(17)
        img = rgb_image(rng.integers(0, 256, size=(9, 9, 3)).astype(np.float64))
        grad = compute_gradients(img)
        assert isinstance(grad, GradientField)
        assert np.all(grad.orientation >= 0) and np.all(grad.orientation < np.pi)
        assert np.all(grad.orientation[grad.magnitude == 0] == 0)


class TestFileIO:
    def test_png_round_trip(self, tmp_path):
        values = np.arange(12, dtype=np.float64).reshape(3, 4) * 20
        path = tmp_path / "map.png"
        save_gray_png(path, values)
        loaded = load_image(path)
        assert np.array_equal(loaded.data[:, :, 0], values)

    def test_mask_binarized_at_128(self, tmp_path):
        values = np.array([[0, 127], [128, 255]], dtype=np.float64)
        path = tmp_path / "mask.png"
        save_gray_png(path, values)
        assert np.array_equal(load_mask(path), [[0, 0], [1, 1]])

    def test_unreadable_file_raises_oserror(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(OSError):
            load_image(path)
