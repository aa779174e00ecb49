import numpy as np
import pytest

from vesselacs import features
from vesselacs.errors import DataError
from vesselacs.features import (FeatureMatrix, WindowSpec, feature_matrix,
                                fov_pixels, gray_level_features,
                                hu_moment_features, hu_raw_invariants,
                                normalize)
from vesselacs.imaging import DatasetEntry, synth_retina


def brute_window_stats(img, x, y, side):
    r = side // 2
    vals = []
    for yy in range(max(0, y - r), min(img.shape[0], y + r + 1)):
        for xx in range(max(0, x - r), min(img.shape[1], x + r + 1)):
            vals.append(img[yy, xx])
    vals = np.array(vals, dtype=float)
    return vals.min(), vals.max(), vals.mean(), vals.std()


class TestGrayLevelFeatures:
    def test_constant_image(self):
        img = np.full((7, 7), 100.0)
        f = gray_level_features(img, 3, 3, WindowSpec(3, 3))
        assert np.allclose(f, [0, 0, 0, 0, 100])

    def test_dark_center_bright_ring(self):
        img = np.full((5, 5), 255.0)
        img[2, 2] = 0.0
        f = gray_level_features(img, 2, 2, WindowSpec(3, 3))
        assert f[0] == 0.0  # center - min
        assert f[1] == 255.0  # max - center
        assert f[4] == 0.0

    def test_checkerboard_matches_brute_force(self):
        img = np.indices((5, 5)).sum(axis=0) % 2 * 255.0
        img[2, 2] = 0.0
        f = gray_level_features(img, 2, 2, WindowSpec(3, 3))
        lo, hi, mean, std = brute_window_stats(img, 2, 2, 3)
        assert f[2] == pytest.approx(img[2, 2] - mean, rel=1e-12, abs=1e-12)
        assert f[3] == pytest.approx(std, rel=1e-12)

    def test_f1_f2_nonneg_and_sum_to_range(self):
        rng = np.random.default_rng(11)
        img = rng.uniform(0, 255, (12, 12))
        spec = WindowSpec(5, 5)
        for x, y in [(0, 0), (11, 11), (0, 6), (5, 5), (11, 0)]:
            f = gray_level_features(img, x, y, spec)
            lo, hi, _, _ = brute_window_stats(img, x, y, 5)
            assert f[0] >= 0 and f[1] >= 0 and f[3] >= 0
            assert f[0] + f[1] == pytest.approx(hi - lo, rel=1e-12)
            assert np.isfinite(f).all()

    def test_window_spec_validation(self):
        with pytest.raises(DataError):
            WindowSpec(8, 17)
        with pytest.raises(DataError):
            WindowSpec(9, 1)


class TestHuInvariants:
    def test_single_pixel_at_centroid(self):
        w = np.zeros((9, 9))
        w[4, 4] = 5.0
        hu, degenerate = hu_raw_invariants(w)
        assert not degenerate
        assert hu[0] == 0.0

    def test_zero_mass_degenerate(self):
        hu, degenerate = hu_raw_invariants(np.zeros((7, 7)))
        assert degenerate
        assert np.all(hu == 0)
        img = np.zeros((20, 20))
        assert np.all(hu_moment_features(img, 10, 10) == 0)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(2)
        w = rng.uniform(0, 255, (17, 17))
        base, _ = hu_raw_invariants(w)
        for k in (1, 2, 3):
            rot, _ = hu_raw_invariants(np.rot90(w, k))
            rel = np.abs(rot - base) / np.maximum(np.abs(base), 1e-300)
            assert rel.max() < 1e-6

    def test_intensity_scaling_invariance(self):
        rng = np.random.default_rng(4)
        w = rng.uniform(0, 255, (17, 17))
        base, _ = hu_raw_invariants(w)
        scaled, _ = hu_raw_invariants(2.0 * w)
        rel = np.abs(scaled - base) / np.maximum(np.abs(base), 1e-300)
        assert rel.max() < 1e-9

    def test_translation_inside_larger_window(self):
        rng = np.random.default_rng(5)
        pattern = rng.uniform(0, 255, (7, 7))
        a = np.zeros((21, 21))
        b = np.zeros((21, 21))
        a[2:9, 2:9] = pattern
        b[10:17, 12:19] = pattern
        ha, _ = hu_raw_invariants(a)
        hb, _ = hu_raw_invariants(b)
        rel = np.abs(ha - hb) / np.maximum(np.abs(ha), 1e-300)
        assert rel.max() < 1e-6

    def test_log_compression_sign_and_magnitude(self):
        assert features.log_compress(np.array([1e-3]))[0] == pytest.approx(
            3.0, abs=1e-9)
        assert features.log_compress(np.array([-1e-3]))[0] == pytest.approx(
            -3.0, abs=1e-9)
        assert features.log_compress(np.array([0.0]))[0] == 0.0


class TestFeatureMatrix:
    def test_empty_pixel_list(self, synth_entry):
        fm = feature_matrix(synth_entry, [])
        assert len(fm) == 0
        assert fm.stats() is None

    def test_single_pixel_stats(self, synth_entry):
        ys, xs = np.nonzero(synth_entry.fov)
        fm = feature_matrix(synth_entry, [(int(xs[0]), int(ys[0]))])
        mean, std, lo, hi = fm.stats()
        assert np.allclose(mean, fm.values[0])
        assert np.all(std == 0)

    def test_full_fov_row_count(self, synth_entry):
        pixels = fov_pixels(synth_entry.fov)
        fm = feature_matrix(synth_entry, pixels)
        assert len(fm) == int(synth_entry.fov.sum())

    def test_pixel_outside_fov_rejected(self, synth_entry):
        with pytest.raises(DataError):
            feature_matrix(synth_entry, [(0, 0)])

    def test_deterministic(self, synth_entry):
        pixels = fov_pixels(synth_entry.fov)[:50]
        a = feature_matrix(synth_entry, pixels)
        b = feature_matrix(synth_entry, pixels)
        assert np.array_equal(a.values, b.values)

    def test_csv_round_trip(self, synth_entry, tmp_path):
        pixels = fov_pixels(synth_entry.fov)[:20]
        fm = feature_matrix(synth_entry, pixels)
        fm.to_csv(tmp_path / "m.csv", header_lines=["seed=0"])
        back = FeatureMatrix.from_csv(tmp_path / "m.csv")
        assert back.image_ids == fm.image_ids
        assert np.array_equal(back.coords, fm.coords)
        assert np.array_equal(back.values, fm.values)

    def test_border_pixels_finite(self):
        entry = synth_retina(9, 64, 64, 3)
        full_fov = DatasetEntry(entry.image_id, entry.image,
                                np.ones(entry.fov.shape, dtype=bool),
                                entry.truth)
        corners = [(0, 0), (63, 0), (0, 63), (63, 63)]
        fm = feature_matrix(full_fov, corners)
        assert np.isfinite(fm.values).all()


class TestNormalize:
    def _matrix(self, values):
        n = values.shape[0]
        return FeatureMatrix(image_ids=["a"] * n,
                             coords=np.zeros((n, 2), dtype=int),
                             values=values)

    def test_z_score_identity(self):
        rng = np.random.default_rng(8)
        m = self._matrix(rng.normal(3.0, 2.0, (50, 14)))
        mean, std, _, _ = m.stats()
        z = normalize(m, mean, std)
        assert np.abs(z.values.mean(axis=0)).max() < 1e-9
        assert np.abs(z.values.std(axis=0) - 1).max() < 1e-9

    def test_constant_column_passes_through_as_zero(self):
        rng = np.random.default_rng(9)
        vals = rng.normal(0, 1, (30, 14))
        vals[:, 4] = 7.0
        m = self._matrix(vals)
        mean, std, _, _ = m.stats()
        z = normalize(m, mean, std)
        assert np.all(z.values[:, 4] == 0)

    def test_round_trip(self):
        rng = np.random.default_rng(10)
        m = self._matrix(rng.normal(0, 5, (40, 14)))
        mean, std, _, _ = m.stats()
        z = normalize(m, mean, std)
        restored = z.values * std + mean
        assert np.abs(restored - m.values).max() < 1e-9
