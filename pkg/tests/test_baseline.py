import numpy as np
import pytest
from scipy.spatial.distance import cdist

from patchflow.baseline import TOConfig, assignment_energy, to_iteration, to_synthesize
from patchflow.image import normalize
from patchflow.metrics import sliced_wasserstein
from patchflow.patches import extract_patches
from patchflow.textures import checker, stripes


class TestTOConfig:
    def test_defaults(self):
        cfg = TOConfig(out_w=128, out_h=128)
        assert cfg.patch_sizes == (32, 16, 8)
        assert cfg.iterations == 10
        assert cfg.scales == 4

    @pytest.mark.parametrize(
        "kw",
        [
            {"patch_sizes": ()},
            {"patch_sizes": (8, 16)},
            {"patch_sizes": (8, 0)},
            {"iterations": 0},
            {"scales": 0},
            {"ref_stride": 0},
            {"out_w": 4, "out_h": 4},
        ],
    )
    def test_validation(self, kw):
        base = dict(out_w=64, out_h=64)
        base.update(kw)
        with pytest.raises(ValueError):
            TOConfig(**base).validate()


class TestAssignmentEnergy:
    def test_matches_direct_sum(self):
        rng = np.random.default_rng(0)
        patches = rng.standard_normal((10, 6))
        refs = rng.standard_normal((20, 6))
        assign = rng.integers(0, 20, size=10)
        expect = sum(((patches[i] - refs[assign[i]]) ** 2).sum() for i in range(10))
        assert np.isclose(assignment_energy(patches, refs, assign), expect, atol=1e-9)

    def test_zero_for_perfect_assignment(self):
        refs = np.arange(12.0).reshape(4, 3)
        assert assignment_energy(refs[[2, 0]], refs, np.array([2, 0])) == 0.0

    def test_shape_check(self):
        with pytest.raises(ValueError):
            assignment_energy(np.zeros((3, 2)), np.zeros((5, 2)), np.zeros(2, dtype=int))


class TestToIteration:
    def test_assignment_matches_exact_nn(self):
        rng = np.random.default_rng(1)
        ex = normalize(checker(32, 32, cell=4))
        ref = extract_patches(ex, 8, 4)
        x = rng.standard_normal((32, 32, 1))
        pset = extract_patches(x, 8, 4)
        _, energy = to_iteration(x, ref, 8, 4)
        d = cdist(pset.patches, ref.patches, "sqeuclidean")
        assert np.isclose(energy, d.min(axis=1).sum(), rtol=1e-9)

    def test_energy_non_increasing(self):
        rng = np.random.default_rng(2)
        ex = normalize(stripes(48, 48, period=8))
        ref = extract_patches(ex, 16, 4)
        x = rng.standard_normal((48, 48, 1))
        energies = []
        for _ in range(10):
            x, e = to_iteration(x, ref, 16, 4)
            energies.append(e)
        for before, after in zip(energies, energies[1:]):
            assert after <= before * (1 + 1e-9)

    def test_worker_invariance(self):
        rng = np.random.default_rng(3)
        ex = normalize(checker(32, 32, cell=8))
        ref = extract_patches(ex, 8, 4)
        x = rng.standard_normal((32, 32, 1))
        a, ea = to_iteration(x, ref, 8, 4, workers=1)
        b, eb = to_iteration(x, ref, 8, 4, workers=3)
        assert np.array_equal(a, b) and ea == eb


class TestToSynthesize:
    def test_output_shape_and_determinism(self):
        ex = normalize(stripes(48, 48, period=8))
        cfg = TOConfig(out_w=48, out_h=40, patch_sizes=(16, 8), iterations=3, scales=2, seed=4)
        a = to_synthesize(ex, cfg)
        b = to_synthesize(ex, cfg)
        assert a.shape == (40, 48, 1)
        assert np.array_equal(a, b)

    def test_close_to_exemplar_distribution(self):
        ex = normalize(stripes(64, 64, period=8))
        cfg = TOConfig(out_w=64, out_h=64, patch_sizes=(16, 8), iterations=6, scales=2, seed=0)
        out = to_synthesize(ex, cfg)
        ref_np = extract_patches(ex, 8, 8)
        sw = sliced_wasserstein(extract_patches(out, 8, 8), ref_np, 128, np.random.default_rng(0))
        noise = np.random.default_rng(7).standard_normal(ex.shape)
        sw_noise = sliced_wasserstein(extract_patches(noise, 8, 8), ref_np, 128, np.random.default_rng(0))
        assert sw < sw_noise / 5

    def test_oversized_patch_sizes_skipped(self):
        # 64-px patches never fit a 48-px exemplar; the run must still work
        # with the remaining sizes.
        ex = normalize(checker(48, 48, cell=8))
        cfg = TOConfig(out_w=48, out_h=48, patch_sizes=(64, 8), iterations=2, scales=2, seed=1)
        out = to_synthesize(ex, cfg)
        assert out.shape == (48, 48, 1)

    def test_error_when_nothing_fits(self):
        ex = normalize(checker(8, 8, cell=4))
        cfg = TOConfig(out_w=64, out_h=64, patch_sizes=(32, 16), iterations=1, scales=1, seed=0)
        with pytest.raises(ValueError):
            to_synthesize(ex, cfg)

    def test_rgb(self):
        rng = np.random.default_rng(5)
        ex = normalize(rng.integers(0, 256, size=(48, 48, 3)).astype(float))
        cfg = TOConfig(out_w=32, out_h=32, patch_sizes=(8,), iterations=2, scales=1, seed=2)
        out = to_synthesize(ex, cfg)
        assert out.shape == (32, 32, 3)
