import math

import numpy as np
import pytest
from scipy import stats

from cmcl import compress as cp
from cmcl.mcl import Belief
from cmcl.world_map import Detection, Pose


def uniform_belief(states):
    states = np.asarray(states, dtype=float)
    return Belief(states, np.full(len(states), 1.0 / len(states)))


def rows_as_set(points):
    return {tuple(row) for row in np.asarray(points)}


class TestProjection:
    def test_identical_particles(self):
        b = uniform_belief(np.tile([1.0, 2.0, 0.5], (30, 1)))
        pts = cp.project_samples(b, Detection(1.0, 0.0))
        assert pts.shape == (30, 2)
        assert np.allclose(pts, pts[0])

    def test_quarter_turn(self):
        b = uniform_belief([[0.0, 0.0, 0.0]])
        pts = cp.project_samples(b, Detection(2.0, math.pi / 2))
        assert np.allclose(pts[0], [0.0, 2.0], atol=1e-12)

    def test_length_preserved(self):
        rng = np.random.default_rng(0)
        for n in (1, 7, 100):
            b = uniform_belief(rng.uniform(0, 1, (n, 3)))
            assert cp.project_samples(b, Detection(1.0, 0.3)).shape == (n, 2)


class TestIidThin:
    def test_k_equals_n_is_permutation(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, (20, 2))
        out = cp.iid_thin(pts, 20, rng)
        assert rows_as_set(out) == rows_as_set(pts)

    def test_k_one_is_member(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(0, 1, (10, 2))
        out = cp.iid_thin(pts, 1, rng)
        assert tuple(out[0]) in rows_as_set(pts)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            cp.iid_thin(np.zeros((3, 2)), 4, np.random.default_rng(0))

    def test_uniform_selection(self):
        pts = np.arange(10, dtype=float).reshape(5, 2)
        counts = np.zeros(5)
        for seed in range(10000):
            out = cp.iid_thin(pts, 1, np.random.default_rng(seed))
            counts[int(out[0, 0]) // 2] += 1
        assert stats.chisquare(counts).pvalue > 0.01


class TestKmeans:
    def test_two_blobs(self):
        rng = np.random.default_rng(3)
        blob1 = rng.normal([0, 0], 0.1, (50, 2))
        blob2 = rng.normal([10, 10], 0.1, (50, 2))
        pts = np.vstack([blob1, blob2])
        clusters = cp.kmeans_cluster(pts, 2, 5, rng)
        means = sorted([tuple(c.mean) for c in clusters])
        assert math.hypot(means[0][0], means[0][1]) < 0.2
        assert math.hypot(means[1][0] - 10, means[1][1] - 10) < 0.2
        assert [c.weight for c in clusters] == [0.5, 0.5]

    def test_k_equals_n(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 10, (8, 2))
        clusters = cp.kmeans_cluster(pts, 8, 5, rng)
        for c in clusters:
            assert c.weight == pytest.approx(1 / 8)
            assert np.allclose(c.cov, cp.COV_FLOOR * np.eye(2))
        assert rows_as_set([c.mean for c in clusters]) == rows_as_set(pts)

    def test_single_repeated_point(self):
        pts = np.tile([3.0, 4.0], (20, 1))
        clusters = cp.kmeans_cluster(pts, 1, 5, np.random.default_rng(5))
        assert np.allclose(clusters[0].mean, [3, 4])
        assert np.allclose(clusters[0].cov, cp.COV_FLOOR * np.eye(2))
        assert clusters[0].weight == 1.0

    def test_n_below_k(self):
        with pytest.raises(ValueError):
            cp.kmeans_cluster(np.zeros((3, 2)), 4, 5, np.random.default_rng(0))

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(0, 2, (200, 2))
        clusters = cp.kmeans_cluster(pts, 8, 5, rng)
        assert sum(c.weight for c in clusters) == pytest.approx(1.0, abs=1e-6)


class TestDncCluster:
    def test_k_one(self):
        rng = np.random.default_rng(7)
        states = np.column_stack([rng.uniform(0, 4, 40), rng.uniform(0, 4, 40),
                                  rng.uniform(0, 6.28, 40)])
        w = rng.uniform(0.1, 1.0, 40)
        b = Belief(states, w / w.sum())
        out = cp.dnc_cluster(b, Detection(1.0, 0.0), 1)
        assert len(out) == 1
        a = out[0]
        assert a.weight == pytest.approx(1.0)
        assert a.centroid.x == pytest.approx(np.dot(b.weights, states[:, 0]))
        assert a.centroid.y == pytest.approx(np.dot(b.weights, states[:, 1]))

    def test_four_corner_blobs(self):
        rng = np.random.default_rng(8)
        corners = np.array([[0, 0], [10, 0], [0, 10], [10, 10]], dtype=float)
        states = []
        for c in corners:
            xy = c + rng.normal(0, 0.1, (25, 2))
            states.append(np.column_stack([xy, rng.uniform(0, 6.28, 25)]))
        b = uniform_belief(np.vstack(states))
        out = cp.dnc_cluster(b, Detection(1.0, 0.0), 4)
        got = sorted((round(a.centroid.x), round(a.centroid.y)) for a in out)
        assert got == sorted(map(tuple, corners.astype(int)))
        for a in out:
            assert a.weight == pytest.approx(0.25)

    def test_diamond_center_spanning_leaf(self):
        # symmetric five-region formation defeats variance/median splits
        rng = np.random.default_rng(9)
        pts, labels = cp.make_diamond_center(rng)
        states = np.column_stack([pts, np.zeros(len(pts))])
        cells = cp.dnc_cells(pts, np.full(len(pts), 1.0 / len(pts)), 8)
        spans = [len(np.unique(labels[idx])) for idx in cells if len(idx)]
        assert max(spans) >= 2
        del states

    def test_power_of_two_required(self):
        b = uniform_belief(np.random.default_rng(0).uniform(0, 1, (16, 3)))
        with pytest.raises(ValueError, match="power of 2"):
            cp.dnc_cluster(b, Detection(1.0, 0.0), 3)

    def test_order_independence(self):
        rng = np.random.default_rng(10)
        states = np.column_stack([rng.uniform(0, 5, 64), rng.uniform(0, 5, 64),
                                  rng.uniform(0, 6.28, 64)])
        w = rng.uniform(0.5, 1.5, 64)
        b1 = Belief(states, w / w.sum())
        perm = rng.permutation(64)
        b2 = Belief(states[perm], (w / w.sum())[perm])
        d = Detection(2.0, 0.3)
        out1 = cp.dnc_cluster(b1, d, 8)
        out2 = cp.dnc_cluster(b2, d, 8)
        key = lambda a: (a.centroid.x, a.centroid.y)
        for a1, a2 in zip(sorted(out1, key=key), sorted(out2, key=key)):
            assert a1.centroid.x == pytest.approx(a2.centroid.x, abs=1e-9)
            assert a1.centroid.y == pytest.approx(a2.centroid.y, abs=1e-9)
            assert a1.weight == pytest.approx(a2.weight, abs=1e-9)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(11)
        b = uniform_belief(np.column_stack(
            [rng.uniform(0, 5, 100), rng.uniform(0, 5, 100), rng.uniform(0, 6.28, 100)]))
        out = cp.dnc_cluster(b, Detection(1.0, 0.0), 8)
        assert sum(a.weight for a in out) == pytest.approx(1.0, abs=1e-6)


class TestDensityTree:
    def test_single_leaf_uniform(self):
        xs, ys = np.meshgrid(np.linspace(0, 1, 10), np.linspace(0, 1, 10))
        pts = np.column_stack([xs.ravel(), ys.ravel()])
        tree = cp.build_det(pts, cp.CompressionConfig(det_max_leaves=1))
        assert len(tree.leaves()) == 1
        assert cp.query_det(tree, (0.5, 0.5)) == pytest.approx(1.0)

    def test_integral_is_one(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            pts = rng.normal(0, 2, (300, 2))
            tree = cp.build_det(pts, cp.CompressionConfig(det_max_leaves=20))
            total = sum(l.density * l.area for l in tree.leaves())
            assert total == pytest.approx(1.0, abs=1e-6)

    def test_leaf_budget(self):
        rng = np.random.default_rng(13)
        pts = rng.normal(0, 2, (500, 2))
        tree = cp.build_det(pts, cp.CompressionConfig(det_max_leaves=7))
        assert len(tree.leaves()) <= 7

    def test_two_adjacent_blocks(self):
        rng = np.random.default_rng(14)
        sparse = np.column_stack([rng.uniform(0, 1, 40), rng.uniform(0, 1, 40)])
        dense = np.column_stack([rng.uniform(1, 2, 160), rng.uniform(0, 1, 160)])
        pts = np.vstack([sparse, dense])
        tree = cp.build_det(pts, cp.CompressionConfig(det_max_leaves=2))
        leaves = sorted(tree.leaves(), key=lambda l: l.density)
        ratio = leaves[1].density / leaves[0].density
        assert ratio == pytest.approx(4.0, rel=0.2)

    def test_query_matches_leaf_scan(self):
        rng = np.random.default_rng(15)
        pts = np.vstack([rng.normal(0, 1, (200, 2)), rng.normal(5, 0.5, (100, 2))])
        tree = cp.build_det(pts, cp.CompressionConfig(det_max_leaves=15))
        bboxes, densities = cp.det_leaf_arrays(tree)
        queries = rng.uniform(-3, 7, (1000, 2))
        vec = cp.det_density_at(bboxes, densities, queries)
        for q, v in zip(queries, vec):
            assert cp.query_det(tree, q) == pytest.approx(v, abs=1e-12)

    def test_outside_is_zero(self):
        pts = np.random.default_rng(16).uniform(0, 1, (50, 2))
        tree = cp.build_det(pts, cp.CompressionConfig())
        assert cp.query_det(tree, (100.0, 100.0)) == 0.0

    def test_identical_points(self):
        pts = np.tile([2.0, 3.0], (10, 1))
        tree = cp.build_det(pts, cp.CompressionConfig())
        leaves = tree.leaves()
        assert len(leaves) == 1
        assert leaves[0].area == pytest.approx(cp._MIN_SIDE**2)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            cp.build_det(np.zeros((1, 2)), cp.CompressionConfig())

    def test_leaves_tile_root(self):
        rng = np.random.default_rng(17)
        pts = rng.normal(0, 1, (400, 2))
        tree = cp.build_det(pts, cp.CompressionConfig(det_max_leaves=12))
        root = tree.nodes[0]
        area = sum(l.area for l in tree.leaves())
        assert area == pytest.approx(root.area, rel=1e-9)
        # pairwise interior overlap is empty
        leaves = tree.leaves()
        for i in range(len(leaves)):
            for j in range(i + 1, len(leaves)):
                a, b = leaves[i].bbox, leaves[j].bbox
                ox = min(a[1], b[1]) - max(a[0], b[0])
                oy = min(a[3], b[3]) - max(a[2], b[2])
                assert min(ox, oy) <= 1e-12


class TestKernelHalving:
    def test_identical_pair(self):
        pts = np.tile([1.0, 1.0], (2, 1))
        out = cp.kt_halve(pts, cp.KernelConfig(bandwidth=1.0),
                          np.random.default_rng(0))
        assert out.shape == (1, 2)
        assert np.allclose(out[0], [1, 1])

    def test_output_size(self):
        rng = np.random.default_rng(18)
        for n in (2, 8, 64, 256):
            pts = rng.normal(0, 1, (n, 2))
            out = cp.kt_halve(pts, cp.KernelConfig(), rng)
            assert out.shape == (n // 2, 2)

    def test_odd_input_rejected(self):
        with pytest.raises(ValueError):
            cp.kt_halve(np.zeros((3, 2)), cp.KernelConfig(), np.random.default_rng(0))

    def test_beats_iid_on_mixture(self):
        kcfg = cp.KernelConfig()
        kt_err = []
        iid_err = []
        for seed in range(200):
            rng = np.random.default_rng(seed)
            pts = np.vstack([rng.normal([0, 0], 0.5, (128, 2)),
                             rng.normal([4, 4], 0.5, (128, 2))])
            half = cp.kt_halve(pts, kcfg, rng)
            ref = cp.iid_thin(pts, 128, rng)
            kt_err.append(cp.mmd(half, pts, kcfg))
            iid_err.append(cp.mmd(ref, pts, kcfg))
        assert np.mean(kt_err) < np.mean(iid_err)


class TestCompresspp:
    def test_cardinality_10000(self):
        rng = np.random.default_rng(19)
        pts = rng.normal(0, 3, (10000, 2))
        out = cp.compresspp(pts, cp.CompressionConfig(), cp.KernelConfig(), rng)
        assert out.shape == (64, 2)

    def test_cardinality_2000(self):
        rng = np.random.default_rng(20)
        pts = rng.normal(0, 3, (2000, 2))
        out = cp.compresspp(pts, cp.CompressionConfig(), cp.KernelConfig(), rng)
        assert out.shape == (32, 2)

    def test_subset_of_input(self):
        rng = np.random.default_rng(21)
        pts = rng.normal(0, 3, (500, 2))
        out = cp.compresspp(pts, cp.CompressionConfig(), cp.KernelConfig(), rng)
        assert out.shape == (16, 2)
        assert rows_as_set(out) <= rows_as_set(pts)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            cp.compresspp(np.zeros((3, 2)), cp.CompressionConfig(),
                          cp.KernelConfig(), np.random.default_rng(0))

    def test_deterministic_under_seed(self):
        pts = np.random.default_rng(22).normal(0, 3, (1024, 2))
        a = cp.compresspp(pts, cp.CompressionConfig(), cp.KernelConfig(),
                          np.random.default_rng(5))
        b = cp.compresspp(pts, cp.CompressionConfig(), cp.KernelConfig(),
                          np.random.default_rng(5))
        assert np.array_equal(a, b)


def mmd_brute_force(a, b, h):
    """Literal double-loop V-statistic estimate."""
    def mean_k(x, y):
        total = 0.0
        for p in x:
            for q in y:
                d2 = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
                total += math.exp(-d2 / (2 * h * h))
        return total / (len(x) * len(y))

    val = mean_k(a, a) - 2 * mean_k(a, b) + mean_k(b, b)
    return math.sqrt(max(val, 0.0))


class TestMmd:
    def test_self_distance_zero(self):
        pts = np.random.default_rng(23).normal(0, 1, (100, 2))
        assert cp.mmd(pts, pts, cp.KernelConfig(bandwidth=0.7)) <= 1e-9

    def test_singletons_closed_form(self):
        a = np.array([[0.0, 0.0]])
        b = np.array([[1.0, 1.0]])
        h = 0.9
        k = math.exp(-2.0 / (2 * h * h))
        expected = math.sqrt(2 - 2 * k)
        assert cp.mmd(a, b, cp.KernelConfig(bandwidth=h)) == pytest.approx(
            expected, abs=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(24)
        for _ in range(20):
            n = int(rng.integers(5, 200))
            m = int(rng.integers(5, 200))
            a = rng.normal(0, 2, (n, 2))
            b = rng.normal(1, 2, (m, 2))
            h = float(rng.uniform(0.3, 3.0))
            got = cp.mmd(a, b, cp.KernelConfig(bandwidth=h))
            assert got == pytest.approx(mmd_brute_force(a, b, h), abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cp.mmd(np.zeros((0, 2)), np.zeros((3, 2)), cp.KernelConfig())


class TestDiamondFixture:
    def test_shape(self):
        pts, labels = cp.make_diamond_center(np.random.default_rng(25))
        assert pts.shape == (100, 2)
        assert sorted(np.unique(labels)) == [0, 1, 2, 3, 4]
        for r in range(5):
            assert (labels == r).sum() == 20
