"""Insertion/deletion machinery against a direct re-evaluation oracle."""

import numpy as np
import pytest

from salbench.core import ColorSpace, SaliencyMap, normalize
from salbench.errors import InvalidArgumentError
from salbench.faithfulness import (
    BlurBaseline,
    Curve,
    DatasetMeanBaseline,
    PixelGranularity,
    RegionGranularity,
    UniformNoiseBaseline,
    auc,
    curve_from_csv,
    curve_to_csv,
    deletion_curve,
    insertion_curve,
    make_baseline,
    perturbation_order,
)
from salbench.models import ConstantModel, RegionMeanModel

from conftest import make_image


def indicator_map(h, w, region):
    grid = np.zeros((h, w), dtype=np.float32)
    for r, c in region:
        grid[r, c] = 1.0
    return SaliencyMap(grid, postprocessed=True)


def brute_force_curve(image, smap, region, insert, baseline_value=0.0):
    """Re-evaluate the region mean directly after every single-pixel step."""
    h, w = smap.height, smap.width
    flat = smap.data.ravel()
    order = sorted(range(h * w), key=lambda i: (-float(flat[i]), i))
    work = np.full_like(image.data, baseline_value) if insert else image.data.copy()
    source = image.data if insert else np.full_like(image.data, baseline_value)

    def region_mean():
        total = 0.0
        for r, c in region:
            for ch in range(image.channels):
                total += float(work[r, c, ch])
        return total / (len(region) * image.channels)

    xs, ys = [0.0], [region_mean()]
    for i, idx in enumerate(order):
        r, c = divmod(idx, w)
        work[r, c, :] = source[r, c, :]
        xs.append((i + 1) / (h * w))
        ys.append(region_mean())
    return np.array(xs), np.array(ys)


class TestMakeBaseline:
    def test_dataset_mean_maps_to_zero_after_normalization(self):
        img = make_image(np.random.default_rng(0).random((4, 4, 3), dtype=np.float32))
        base = make_baseline(img, DatasetMeanBaseline())
        np.testing.assert_allclose(normalize(base).data, 0.0, atol=1e-6)

    def test_blur_of_constant_is_constant(self):
        img = make_image(np.full((6, 6), 0.3, dtype=np.float32))
        base = make_baseline(img, BlurBaseline(kernel_size=5, sigma=2.0))
        assert np.array_equal(base.data, img.data)

    def test_uniform_noise_seeded(self):
        img = make_image(np.zeros((4, 4, 3), dtype=np.float32))
        a = make_baseline(img, UniformNoiseBaseline(seed=5))
        b = make_baseline(img, UniformNoiseBaseline(seed=5))
        c = make_baseline(img, UniformNoiseBaseline(seed=6))
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_requires_raw_space(self):
        img = normalize(make_image(np.zeros((2, 2, 3), dtype=np.float32)))
        with pytest.raises(InvalidArgumentError):
            make_baseline(img, DatasetMeanBaseline())


class TestPerturbationOrder:
    def test_pixel_order_with_row_major_ties(self):
        # Min-max-scaled rendition of [[0.9, 0.1], [0.5, 0.5]]; same ordering.
        from salbench.core import minmax_scale

        smap = minmax_scale(np.array([[0.9, 0.1], [0.5, 0.5]], dtype=np.float32))
        groups = perturbation_order(smap, PixelGranularity())
        order = [int(g[0]) for g in groups]
        assert order == [0, 2, 3, 1]  # (0,0), (1,0), (1,1), (0,1)

    def test_constant_map_is_row_major(self):
        smap = SaliencyMap(np.zeros((3, 4), dtype=np.float32), postprocessed=True)
        groups = perturbation_order(smap, PixelGranularity())
        assert [int(g[0]) for g in groups] == list(range(12))

    def test_region_window_covers_small_map(self):
        grid = np.zeros((3, 3), dtype=np.float32)
        grid[1, 1] = 1.0
        groups = perturbation_order(SaliencyMap(grid, postprocessed=True), RegionGranularity(1))
        assert len(groups) == 1
        assert sorted(groups[0].tolist()) == list(range(9))

    def test_groups_partition_pixels(self):
        rng = np.random.default_rng(13)
        for gran in (PixelGranularity(), RegionGranularity(2), RegionGranularity(4)):
            for _ in range(3):
                h, w = int(rng.integers(2, 33)), int(rng.integers(2, 33))
                values = rng.random((h, w), dtype=np.float32)
                values.flat[rng.choice(h * w, size=h * w // 3)] = 0.5  # force ties
                smap = SaliencyMap(
                    (values - values.min()) / (values.max() - values.min()), postprocessed=True
                )
                groups = perturbation_order(smap, gran)
                combined = np.concatenate(groups)
                assert np.array_equal(np.sort(combined), np.arange(h * w))

    def test_region_groups_exhaust_tiles_in_value_order(self):
        # A map constant over aligned 9x9 tiles: Region(4) seeds must exhaust the
        # tiles in exactly the order of the tile values (pixel order of maxima).
        tile_values = np.array([[0.9, 0.3, 0.7], [0.1, 1.0, 0.5]], dtype=np.float32)
        grid = np.kron(tile_values, np.ones((9, 9), dtype=np.float32))
        smap = SaliencyMap(grid, postprocessed=True)
        groups = perturbation_order(smap, RegionGranularity(4))
        flat = grid.ravel()
        seed_tiles = []
        for g in groups:
            # The group's seed is its first row-major member of maximal saliency.
            seed = int(g[np.argmax(flat[g])])
            r, c = divmod(seed, grid.shape[1])
            tile = (r // 9) * 3 + (c // 9)
            if tile not in seed_tiles:
                seed_tiles.append(tile)
        expected = [int(i) for i in np.argsort(-tile_values.ravel(), kind="stable")]
        assert seed_tiles == expected


class TestCurves:
    def test_constant_model_flat_curve(self):
        img = make_image(np.random.default_rng(0).random((4, 4, 1), dtype=np.float32))
        smap = indicator_map(4, 4, [(0, 0)])
        curve = deletion_curve(
            ConstantModel(0.6), img, smap, DatasetMeanBaseline(mean=(0.0,)), step_fraction=0.25
        )
        np.testing.assert_allclose(curve.ys, 0.6, atol=1e-7)
        assert auc(curve) == pytest.approx(0.6, abs=1e-7)

    def test_deletion_of_oracle_map_is_linear_then_zero(self):
        h = w = 4
        region = [(0, 1), (1, 2), (3, 3)]
        img = make_image(np.ones((h, w), dtype=np.float32))
        model = RegionMeanModel(region=tuple(region))
        curve = deletion_curve(
            model, img, indicator_map(h, w, region), DatasetMeanBaseline(mean=(0.0,)),
            step_fraction=1.0 / (h * w),
        )
        k = len(region)
        expected_head = [1.0 - j / k for j in range(k + 1)]
        np.testing.assert_allclose(curve.ys[: k + 1], expected_head, atol=1e-6)
        np.testing.assert_allclose(curve.ys[k + 1 :], 0.0, atol=1e-6)

    def test_reversed_map_keeps_score_until_the_end(self):
        h = w = 4
        region = [(0, 0), (0, 1)]
        complement = [(r, c) for r in range(h) for c in range(w) if (r, c) not in region]
        img = make_image(np.ones((h, w), dtype=np.float32))
        model = RegionMeanModel(region=tuple(region))
        curve = deletion_curve(
            model, img, indicator_map(h, w, complement), DatasetMeanBaseline(mean=(0.0,)),
            step_fraction=1.0 / (h * w),
        )
        np.testing.assert_allclose(curve.ys[: len(complement) + 1], 1.0, atol=1e-6)
        np.testing.assert_allclose(curve.ys[-1], 0.0, atol=1e-6)

    def test_insertion_rises_linearly_for_oracle_map(self):
        h = w = 4
        region = [(2, 2), (3, 0)]
        img = make_image(np.ones((h, w), dtype=np.float32))
        model = RegionMeanModel(region=tuple(region))
        curve = insertion_curve(
            model, img, indicator_map(h, w, region), DatasetMeanBaseline(mean=(0.0,)),
            step_fraction=1.0 / (h * w),
        )
        k = len(region)
        np.testing.assert_allclose(curve.ys[: k + 1], [j / k for j in range(k + 1)], atol=1e-6)
        np.testing.assert_allclose(curve.ys[k + 1 :], 1.0, atol=1e-6)

    def test_step_fraction_one_gives_two_point_curve(self):
        img = make_image(np.full((3, 3), 0.5, dtype=np.float32))
        model = RegionMeanModel(region=((1, 1),))
        curve = insertion_curve(
            model, img, indicator_map(3, 3, [(1, 1)]), DatasetMeanBaseline(mean=(0.0,)),
            step_fraction=1.0,
        )
        assert curve.xs.tolist() == [0.0, 1.0]
        np.testing.assert_allclose(curve.ys, [0.0, 0.5], atol=1e-7)

    def test_matches_brute_force_oracle_on_random_instances(self):
        rng = np.random.default_rng(21)
        for _ in range(4):
            h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            k = int(rng.integers(1, h * w))
            flat = rng.choice(h * w, size=k, replace=False)
            region = tuple((int(i // w), int(i % w)) for i in flat)
            img = make_image(rng.random((h, w, 1), dtype=np.float32))
            raw_map = rng.random((h, w), dtype=np.float32)
            raw_map.flat[rng.choice(h * w, size=h * w // 4)] = 0.25  # ties
            smap = SaliencyMap(
                (raw_map - raw_map.min()) / (raw_map.max() - raw_map.min()), postprocessed=True
            )
            model = RegionMeanModel(region=region)
            for insert in (False, True):
                fn = insertion_curve if insert else deletion_curve
                got = fn(model, img, smap, DatasetMeanBaseline(mean=(0.0,)),
                         step_fraction=1.0 / (h * w))
                xs, ys = brute_force_curve(img, smap, region, insert)
                np.testing.assert_allclose(got.xs, xs, atol=1e-6)
                np.testing.assert_allclose(got.ys, ys, atol=1e-6)

    def test_endpoints_exact_for_every_baseline_and_granularity(self):
        rng = np.random.default_rng(8)
        img = make_image(rng.random((10, 10, 3), dtype=np.float32))
        smap = SaliencyMap(
            np.linspace(0, 1, 100, dtype=np.float32).reshape(10, 10), postprocessed=True
        )
        model = RegionMeanModel(region=((2, 2), (7, 7)))
        from salbench.models import ScoreRequest

        orig = model.score_batch(ScoreRequest((img,), 0))[0].target
        for baseline in (DatasetMeanBaseline(), BlurBaseline(), UniformNoiseBaseline(seed=1)):
            base_img = make_baseline(img, baseline)
            base_score = model.score_batch(ScoreRequest((base_img,), 0))[0].target
            for g in (PixelGranularity(), RegionGranularity(2)):
                curve = deletion_curve(model, img, smap, baseline, g, step_fraction=0.2)
                assert curve.ys[0] == pytest.approx(orig, abs=0)
                assert curve.ys[-1] == pytest.approx(base_score, abs=0)

    def test_oracle_map_beats_random_maps_in_both_directions(self):
        h = w = 6
        region = [(0, 2), (1, 1), (2, 4), (3, 3), (4, 0), (5, 5)]
        img = make_image(np.ones((h, w), dtype=np.float32))
        model = RegionMeanModel(region=tuple(region))
        oracle = indicator_map(h, w, region)
        baseline = DatasetMeanBaseline(mean=(0.0,))
        step = 1.0 / (h * w)
        ins_oracle = auc(insertion_curve(model, img, oracle, baseline, step_fraction=step))
        del_oracle = auc(deletion_curve(model, img, oracle, baseline, step_fraction=step))
        for seed in range(20):
            rand = np.random.default_rng(seed).random((h, w)).astype(np.float32)
            rand_map = SaliencyMap((rand - rand.min()) / (rand.max() - rand.min()), postprocessed=True)
            assert ins_oracle > auc(insertion_curve(model, img, rand_map, baseline, step_fraction=step))
            assert del_oracle < auc(deletion_curve(model, img, rand_map, baseline, step_fraction=step))


class TestAuc:
    def test_constant_curve(self):
        curve = Curve(np.array([0.0, 0.5, 1.0]), np.array([1.0, 1.0, 1.0]))
        assert auc(curve) == pytest.approx(1.0)

    def test_linear_ramp(self):
        curve = Curve(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.5, 1.0]))
        assert auc(curve) == pytest.approx(0.5)

    def test_two_point_trapezoid(self):
        curve = Curve(np.array([0.0, 1.0]), np.array([0.2, 0.8]))
        assert auc(curve) == pytest.approx(0.5)

    def test_curve_validation(self):
        with pytest.raises(InvalidArgumentError):
            Curve(np.array([0.0, 0.4]), np.array([0.0, 0.4]))
        with pytest.raises(InvalidArgumentError):
            Curve(np.array([0.0, 0.6, 0.5, 1.0]), np.array([0.0, 0.1, 0.2, 0.3]))


class TestCurveCsv:
    def test_roundtrip_is_exact(self):
        xs = np.array([0.0, 1 / 3, 1.0], dtype=np.float32)
        ys = np.array([0.123456789, 0.5, 0.987654321], dtype=np.float32)
        curve = Curve(xs, ys)
        back = curve_from_csv(curve_to_csv(curve))
        assert np.array_equal(back.xs, curve.xs)
        assert np.array_equal(back.ys, curve.ys)

    def test_header_required(self):
        with pytest.raises(InvalidArgumentError):
            curve_from_csv("a,b\n0,0\n1,1\n")
