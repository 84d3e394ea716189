import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lesionseg import raster
from lesionseg.clustering import cluster_masks, cluster_regions, kmeans
from lesionseg.errors import InvalidK
from oracles import flood_components, kmeans_optimum, naive_dilate, naive_erode


def is_fixed_point(points, res):
    d = ((points[:, None, :] - res.centroids[None]) ** 2).sum(-1)
    nearest = d[np.arange(len(points)), res.labels] <= d.min(axis=1) + 1e-9
    means = all(
        np.allclose(res.centroids[j], points[res.labels == j].mean(0), atol=1e-9)
        for j in range(res.k) if np.any(res.labels == j)
    )
    return bool(nearest.all() and means)


class TestKMeans:
    def test_identical_points(self):
        pts = np.tile([[10.0, 20.0, 30.0]], (15, 1))
        res = kmeans(pts, 1)
        np.testing.assert_array_equal(res.centroids[0], pts[0])
        assert res.objective == 0

    def test_k_equals_n(self):
        pts = np.random.default_rng(0).random((6, 3)) * 100
        res = kmeans(pts, 6)
        assert res.objective == pytest.approx(0, abs=1e-12)
        assert sorted(res.labels.tolist()) == list(range(6))

    def test_separated_blobs(self):
        rng = np.random.default_rng(1)
        centers = np.array([[0.0, 0, 0], [40, 0, 0], [0, 40, 0]])
        pts = np.concatenate([c + rng.normal(0, 1, (20, 3)) for c in centers])
        truth = np.repeat(np.arange(3), 20)
        res = kmeans(pts, 3, seed=2)
        # same partition up to relabelling
        pairs = {(a, b) for a, b in zip(truth, res.labels)}
        assert len(pairs) == 3
        sub = pts[rng.choice(60, 8, replace=False)]
        assert kmeans(sub, 3, seed=0).objective == pytest.approx(kmeans_optimum(sub, 3), abs=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_small_sets_against_enumeration(self, seed):
        rng = np.random.default_rng(100 + seed)
        n, k = int(rng.integers(3, 9)), int(rng.integers(1, 4))
        pts = rng.random((n, 3)) * 50
        best = kmeans_optimum(pts, k)
        single = kmeans(pts, k, seed=seed)
        assert is_fixed_point(pts, single)
        assert single.objective >= best - 1e-9
        res = kmeans(pts, k, seed=seed, n_init=10)
        assert is_fixed_point(pts, res)
        assert res.objective <= best + 1e-9 or res.objective <= 1.05 * best

    def test_restarts_never_worse(self):
        pts = np.random.default_rng(7).random((40, 3)) * 100
        one = kmeans(pts, 4, seed=3)
        many = kmeans(pts, 4, seed=3, n_init=6)
        assert many.objective <= one.objective
        assert np.all(np.diff(many.history) <= 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(1, 8))
    def test_history_non_increasing(self, seed, k):
        pts = np.random.default_rng(seed).random((300, 3)) * 255
        hist = np.array(kmeans(pts, k, seed=seed).history)
        assert np.all(np.diff(hist) <= 0)

    def test_permutation_robust(self):
        rng = np.random.default_rng(3)
        centers = rng.random((4, 3)) * 200
        pts = np.concatenate([c + rng.normal(0, 2, (50, 3)) for c in centers])
        perm = rng.permutation(len(pts))
        a, b = kmeans(pts, 4, seed=0), kmeans(pts[perm], 4, seed=0)
        assert a.objective == pytest.approx(b.objective, abs=1e-9)

    def test_deterministic(self):
        pts = np.random.default_rng(4).random((500, 3))
        a, b = kmeans(pts, 5, seed=9), kmeans(pts, 5, seed=9)
        assert a.labels.tobytes() == b.labels.tobytes()
        assert a.centroids.tobytes() == b.centroids.tobytes()

    def test_empty_clusters_reseeded(self):
        pts = np.array([[0.0, 0, 0]] * 10 + [[1.0, 1, 1]])
        res = kmeans(pts, 2)
        assert set(res.labels.tolist()) == {0, 1}

    @pytest.mark.parametrize("k", [0, -1, 4])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidK):
            kmeans(np.zeros((3, 3)), k)


def halves(size=128):
    img = np.zeros((size, size, 3))
    img[:, : size // 2] = [200, 150, 130]
    img[:, size // 2:] = [90, 60, 50]
    return img


class TestClusterRegions:
    def test_two_halves(self):
        regions = cluster_regions(halves(), 2)
        assert len(regions) == 2
        masks = sorted((r.mask for r in regions), key=lambda m: m[0, 0])
        left = np.zeros((128, 128), bool)
        left[:, :64] = True
        np.testing.assert_array_equal(masks[0], ~left)
        np.testing.assert_array_equal(masks[1], left)

    def test_constant_image(self):
        img = np.full((96, 96, 3), 120.0)
        regions = cluster_regions(img, 3)
        assert regions and max(r.area for r in regions) >= 0.99 * 96 * 96

    def test_speckles_removed(self):
        img = np.full((100, 100, 3), 180.0)
        for y, x in [(10, 10), (30, 70), (50, 50), (80, 20), (85, 85)]:
            img[y:y + 2, x:x + 2] = 20
        masks = cluster_masks(img, 2)
        labels = kmeans(img.reshape(-1, 3), 2).labels.reshape(100, 100)
        for j, m in enumerate(masks):
            raw = labels == j
            expected = naive_erode(naive_dilate(naive_dilate(naive_erode(raw, 10), 10), 10), 10)
            np.testing.assert_array_equal(m, expected)
        regions = cluster_regions(img, 2)
        assert len(regions) == 1 and regions[0].area == 100 * 100

    def test_regions_are_components_above_min_area(self):
        rng = np.random.default_rng(5)
        img = np.kron(rng.integers(0, 3, (6, 6)), np.ones((20, 20)))[..., None] * [80.0, 60, 40]
        img += rng.normal(0, 2, img.shape)
        regions = cluster_regions(img, 3, min_area=300)
        for r in regions:
            assert r.area >= 300
            assert len(flood_components(r.mask)) == 1

    def test_deterministic(self):
        img = np.random.default_rng(6).random((64, 64, 3)) * 255
        a = cluster_regions(img, 4, seed=1, min_area=10)
        b = cluster_regions(img, 4, seed=1, min_area=10)
        assert [(r.bbox, r.area, r.cluster) for r in a] == [(r.bbox, r.area, r.cluster) for r in b]
        assert all(np.array_equal(x.mask, y.mask) for x, y in zip(a, b))

    def test_invalid_k_propagates(self):
        with pytest.raises(InvalidK):
            cluster_regions(halves(32), 0)

    def test_masks_match_disk_cleanup(self):
        img = halves(64)
        img[10:14, 40:44] = [200, 150, 130]
        se = raster.disk(10)
        labels = kmeans(img.reshape(-1, 3), 2).labels.reshape(64, 64)
        for j, m in enumerate(cluster_masks(img, 2)):
            np.testing.assert_array_equal(m, raster.closing(raster.opening(labels == j, se), se))
