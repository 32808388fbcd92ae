import numpy as np
import pytest

from patchflow.image import as_image, normalize
from patchflow.metrics import (
    CSV_COLUMNS,
    EXACT_W2_MAX,
    MetricReport,
    autocorr_distance,
    compare,
    exact_w2,
    novelty_maps,
    sliced_wasserstein,
)
from patchflow.patches import extract_patches
from patchflow.textures import stripes


class TestSlicedWasserstein:
    def test_identical_sets_zero(self):
        pts = np.random.default_rng(0).standard_normal((40, 6))
        assert sliced_wasserstein(pts, pts.copy(), 32, np.random.default_rng(1)) == 0.0

    def test_point_masses_1d(self):
        a = np.array([[0.0]])
        b = np.array([[1.0]])
        assert np.isclose(sliced_wasserstein(a, b, 16, np.random.default_rng(0)), 1.0)

    def test_1d_equals_sorted_matching(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((30, 1))
        b = rng.standard_normal((30, 1))
        expect = np.mean((np.sort(a[:, 0]) - np.sort(b[:, 0])) ** 2)
        got = sliced_wasserstein(a, b, 8, np.random.default_rng(3))
        assert np.isclose(got, expect, rtol=1e-12)

    def test_translation_calibration(self):
        # For a pure shift the dimension-scaled sliced value equals the
        # squared shift length, which is also the assignment cost.
        rng = np.random.default_rng(4)
        base = rng.standard_normal((100, 16))
        shift = rng.standard_normal(16)
        got = sliced_wasserstein(base, base + shift, 4096, np.random.default_rng(5))
        assert np.isclose(got, (shift**2).sum(), rtol=0.1)

    def test_unequal_sizes_via_quantiles(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((64, 3))
        dup = np.vstack([a, a])
        got = sliced_wasserstein(a, dup, 64, np.random.default_rng(7))
        assert got < 0.05

    def test_deterministic_given_rng_seed(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((20, 4))
        b = rng.standard_normal((25, 4))
        x = sliced_wasserstein(a, b, 32, np.random.default_rng(9))
        y = sliced_wasserstein(a, b, 32, np.random.default_rng(9))
        assert x == y

    def test_spread_shrinks_with_projections(self):
        # Repeated estimates concentrate as the projection count grows.
        rng = np.random.default_rng(10)
        a = rng.standard_normal((64, 8))
        b = rng.standard_normal((64, 8)) + 0.5
        spreads = []
        for proj in (16, 64, 256):
            vals = [
                sliced_wasserstein(a, b, proj, np.random.default_rng(100 + rep))
                for rep in range(10)
            ]
            spreads.append(np.std(vals))
        assert spreads[0] >= spreads[1] >= spreads[2]

    def test_mean_approaches_exact_on_translated_clouds(self):
        # Where the slicing calibration is exact (pure translations) the
        # estimate converges to the assignment cost as projections grow.
        rng = np.random.default_rng(11)
        base = rng.standard_normal((64, 8))
        moved = base + rng.standard_normal(8) * 0.6
        exact = exact_w2(base, moved)
        errs = []
        for proj in (16, 64, 256):
            vals = [
                sliced_wasserstein(base, moved, proj, np.random.default_rng(200 + rep))
                for rep in range(10)
            ]
            errs.append(abs(np.mean(vals) - exact) / exact)
        assert errs[-1] < 0.15
        assert errs[-1] <= errs[0]

    def test_errors(self):
        with pytest.raises(ValueError):
            sliced_wasserstein(np.zeros((3, 2)), np.zeros((3, 3)), 8, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sliced_wasserstein(np.zeros((3, 2)), np.zeros((3, 2)), 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sliced_wasserstein(np.zeros((0, 2)), np.zeros((3, 2)), 8, np.random.default_rng(0))


class TestExactW2:
    def test_identical_zero(self):
        pts = np.random.default_rng(0).standard_normal((30, 5))
        assert exact_w2(pts, pts.copy()) == 0.0

    def test_permutation_invariance(self):
        a = np.array([[0.0], [1.0]])
        b = np.array([[1.0], [0.0]])
        assert exact_w2(a, b) == 0.0

    def test_three_point_sorted_matching(self):
        a = np.array([[0.0], [2.0], [5.0]])
        b = np.array([[1.0], [6.0], [1.5]])
        # 1-D optimal transport matches sorted samples.
        expect = np.mean((np.sort(a[:, 0]) - np.sort(b[:, 0])) ** 2)
        assert np.isclose(exact_w2(a, b), expect, rtol=1e-12)

    def test_size_limits(self):
        big = np.zeros((EXACT_W2_MAX + 1, 2))
        with pytest.raises(ValueError):
            exact_w2(big, big)
        with pytest.raises(ValueError):
            exact_w2(np.zeros((3, 2)), np.zeros((4, 2)))


class TestAutocorrDistance:
    def test_identical_zero(self):
        img = as_image(np.random.default_rng(0).uniform(size=(16, 16)))
        assert autocorr_distance(img, img.copy()) == 0.0

    def test_periodic_shift_invariance(self):
        rng = np.random.default_rng(1)
        img = as_image(rng.uniform(size=(16, 16)))
        rolled = np.roll(np.roll(img, 5, axis=0), 3, axis=1)
        assert autocorr_distance(img, rolled) < 1e-6

    def test_noise_vs_stripes_exceeds_noise_vs_noise(self):
        rng = np.random.default_rng(2)
        bands = normalize(stripes(32, 32, period=2))
        noise_a = as_image(rng.standard_normal((32, 32)))
        noise_b = as_image(rng.standard_normal((32, 32)))
        d_structured = autocorr_distance(noise_a, bands)
        d_noise = autocorr_distance(noise_a, noise_b)
        assert d_structured > d_noise > 0

    def test_resizes_second_image(self):
        rng = np.random.default_rng(3)
        a = as_image(rng.uniform(size=(16, 16)))
        b = as_image(rng.uniform(size=(32, 24)))
        assert autocorr_distance(a, b) >= 0

    def test_constant_image_rejected(self):
        flat = as_image(np.zeros((8, 8)))
        tex = as_image(np.random.default_rng(4).uniform(size=(8, 8)))
        with pytest.raises(ValueError):
            autocorr_distance(flat, tex)

    def test_too_small(self):
        with pytest.raises(ValueError):
            autocorr_distance(as_image(np.ones((1, 4))), as_image(np.ones((1, 4))))


class TestNoveltyMaps:
    def test_self_match_is_all_zero_with_identity_coords(self):
        ex = as_image(np.random.default_rng(0).uniform(size=(24, 24)))
        nov = novelty_maps(ex, ex, 8, 4)
        assert np.all(nov.nn_distance == 0.0)
        assert np.array_equal(nov.patch_nn_coords, nov.patch_coords)
        assert not nov.novel_mask.any()
        # Rendered coordinate channels ramp monotonically.
        assert np.all(np.diff(nov.nn_coords[:, 12, 0]) >= 0)
        assert np.all(np.diff(nov.nn_coords[12, :, 1]) >= 0)

    def test_shifted_copy_matches_at_offset(self):
        rng = np.random.default_rng(1)
        ex = as_image(rng.uniform(size=(32, 32)))
        shifted = ex[4:, 4:]
        nov = novelty_maps(shifted, ex, 8, 4)
        assert np.all(nov.patch_sqdist < 1e-20)
        assert np.array_equal(nov.patch_nn_coords, nov.patch_coords + 4)

    def test_noise_is_novel(self):
        rng = np.random.default_rng(2)
        ex = normalize(stripes(32, 32, period=8))
        noise = as_image(rng.standard_normal((32, 32)))
        nov = novelty_maps(noise, ex, 8, 4)
        assert nov.mean_sqdist > 0
        assert nov.novel_mask.any()

    def test_coordinate_round_trip(self):
        # At a zero-distance patch, re-reading the exemplar at the stored
        # corner reproduces the synthesis patch.
        rng = np.random.default_rng(3)
        ex = as_image(rng.uniform(size=(24, 24)))
        crop = ex[3:19, 5:21]
        nov = novelty_maps(crop, ex, 8, 8)
        sset = extract_patches(crop, 8, 8)
        row = int(np.argmin(nov.patch_sqdist))
        assert nov.patch_sqdist[row] < 1e-12
        rr, cc = nov.patch_nn_coords[row]
        ref_patch = ex[rr : rr + 8, cc : cc + 8, :]
        got = sset.patches[row].reshape(1, 8, 8).transpose(1, 2, 0)
        assert np.allclose(got, ref_patch, atol=1e-6)

    def test_custom_threshold(self):
        ex = as_image(np.random.default_rng(4).uniform(size=(16, 16)))
        nov = novelty_maps(ex, ex, 8, 8, tau=0.0)
        assert not nov.novel_mask.any()  # distances are exactly zero
        with pytest.raises(ValueError):
            novelty_maps(ex, ex, 8, 8, tau=-1.0)


class TestCompareAndReport:
    def test_compare_identical_images(self):
        ex = normalize(stripes(32, 32, period=8))
        report, nov = compare(ex, ex.copy(), patch_size=8)
        assert report.sliced_wasserstein == 0.0
        assert report.exact_w2 == 0.0
        assert report.autocorr_distance == 0.0
        assert report.mean_nn_distance == 0.0
        assert not nov.novel_mask.any()

    def test_compare_skips_exact_for_large_sets(self):
        rng = np.random.default_rng(0)
        big = as_image(rng.uniform(size=(200, 200)))
        report, _ = compare(big, big.copy(), patch_size=8, novelty_stride=16)
        # 25x25 = 625 non-overlapping patches exceeds the exact solver cap.
        assert report.exact_w2 is None
        assert report.sliced_wasserstein == 0.0

    def test_csv_round_trip(self, tmp_path):
        report = MetricReport(
            sliced_wasserstein=1.25, exact_w2=None, autocorr_distance=3.5,
            mean_nn_distance=0.125,
        )
        path = tmp_path / "row.csv"
        report.write_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "1.25,,3.5,0.125"
