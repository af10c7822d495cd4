"""Belief compression backends and the MMD quality measure.

A sender summarizes its particle set (or the projected position set implied
by a detection) before transmitting it.  Backends: full set, i.i.d.
thinning, K-means mixtures, divide-and-conquer cluster abstractions,
density trees, and recursive kernel halving with root-thinning.

Every operation is a pure function of (inputs, rng): identical seeds give
identical outputs.  Thinning outputs are exact coordinate subsets of their
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import kernels
from .mcl import Belief
from .world_map import Detection, Pose, to_absolute_many, to_relative_many, wrap_bearing

# variance floor (m^2 / rad^2) keeping singleton clusters non-singular
COV_FLOOR = 1e-6
# minimum density-tree bbox side for degenerate point sets
_MIN_SIDE = 0.05


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian RKHS kernel; bandwidth None selects the median heuristic."""

    bandwidth: float | None = None
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError("only the gaussian kernel is supported")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class CompressionConfig:
    k_clusters: int = 8
    kmeans_iters: int = 5
    det_max_leaves: int = 20
    det_tries: int = 10
    oversample_g: int = 4
    thinning_k: int = 64

    def __post_init__(self):
        for name in ("k_clusters", "kmeans_iters", "det_max_leaves",
                     "det_tries", "oversample_g", "thinning_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class GaussianCluster:
    """One mixture component: 2D mean, covariance and relative weight."""

    mean: np.ndarray
    cov: np.ndarray
    weight: float


@dataclass(frozen=True)
class ClusterAbstraction:
    """Cluster of sender particles with relative-polar detection statistics.

    detection_mean/detection_var hold the (range, bearing) mean and diagonal
    variance of the detection target position as seen from the cluster
    centroid pose.
    """

    centroid: Pose
    weight: float
    detection_mean: tuple
    detection_var: tuple


def project_samples(b: Belief, d: Detection) -> np.ndarray:
    """Position samples for the detected robot: one point per particle,
    the detection transformed through that particle's pose.  Call on a
    resampled (uniform-weight) belief."""
    return to_absolute_many(d, b.states)


def iid_thin(points, k, rng) -> np.ndarray:
    """k points sampled uniformly without replacement."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"cannot thin {n} points to {k}")
    return points[rng.choice(n, size=k, replace=False)]


# ---------------------------------------------------------------------------
# K-means

def _kmeanspp_seed(points, k, rng):
    n = points.shape[0]
    centroids = np.empty((k, 2))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _assign(points, centroids):
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def kmeans_cluster(points, k, iters, rng) -> list[GaussianCluster]:
    """Lloyd's algorithm with k-means++ seeding, run for exactly ``iters``
    iterations (no convergence check).

    Cluster weight is the member fraction; covariance is the population
    covariance of the members with a diagonal floor.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    centroids = _kmeanspp_seed(points, k, rng)
    for _ in range(iters):
        labels = _assign(points, centroids)
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] > 0:
                centroids[j] = members.mean(axis=0)
    labels = _assign(points, centroids)

    clusters = []
    floor = COV_FLOOR * np.eye(2)
    for j in range(k):
        members = points[labels == j]
        count = members.shape[0]
        if count == 0:
            clusters.append(GaussianCluster(centroids[j].copy(), floor.copy(), 0.0))
            continue
        mean = members.mean(axis=0)
        centered = members - mean
        cov = centered.T @ centered / count + floor
        clusters.append(GaussianCluster(mean, cov, count / n))
    return clusters


# ---------------------------------------------------------------------------
# Divide-and-conquer clustering

def _weighted_var(vals, w):
    total = w.sum()
    mean = np.dot(w, vals) / total
    return np.dot(w, (vals - mean) ** 2) / total


def _split_indices(positions, weights, indices):
    """Split one cell at the weighted median of its highest-variance axis.

    Points equal to the median go left; degenerate medians fall back to the
    previous distinct value, and fully duplicate sets split by count.
    """
    vals_x = positions[indices, 0]
    vals_y = positions[indices, 1]
    w = weights[indices]
    axis = 0 if _weighted_var(vals_x, w) >= _weighted_var(vals_y, w) else 1
    vals = vals_x if axis == 0 else vals_y

    order = np.argsort(vals, kind="stable")
    cum = np.cumsum(w[order])
    # tolerance keeps equal-weight inputs balanced despite fp accumulation
    pos = int(np.searchsorted(cum, cum[-1] / 2.0 - 1e-12, side="left"))
    median = vals[order[pos]]
    left_mask = vals <= median
    if left_mask.all():
        below = vals < median
        if below.any():
            left_mask = vals <= vals[below].max()
        else:
            # all coordinates identical on this axis: split by count
            half = indices.shape[0] // 2
            return indices[order[:half]], indices[order[half:]]
    return indices[left_mask], indices[~left_mask]


def dnc_cells(positions, weights, k) -> list[np.ndarray]:
    """Index sets of the k leaves of the recursive weighted-median split
    (k must be a power of two)."""
    if k < 1 or (k & (k - 1)) != 0:
        raise ValueError(f"cluster count must be a power of 2, got {k}")
    positions = np.asarray(positions, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if positions.shape[0] < k:
        raise ValueError(f"need at least k={k} particles, got {positions.shape[0]}")
    levels = int(round(math.log2(k)))
    cells = [np.arange(positions.shape[0])]
    for _ in range(levels):
        nxt = []
        for idx in cells:
            left, right = _split_indices(positions, weights, idx)
            nxt.append(left)
            nxt.append(right)
        cells = nxt
    return cells


def dnc_cluster(b: Belief, d: Detection, k) -> list[ClusterAbstraction]:
    """Non-iterative, order-independent clustering of the particle set by
    recursive weighted-median splits along the axis of highest variance.

    Each of the k leaves (k must be a power of two) is summarized by its
    weighted centroid pose, total weight, and the relative-polar mean and
    variance of the detection target as seen from the centroid.
    """
    weights = b.weights
    cells = dnc_cells(b.positions, weights, k)
    total_w = weights.sum()
    out = []
    for idx in cells:
        w = weights[idx]
        wsum = w.sum()
        states = b.states[idx]
        cx = np.dot(w, states[:, 0]) / wsum
        cy = np.dot(w, states[:, 1]) / wsum
        cth = math.atan2(np.dot(w, np.sin(states[:, 2])),
                         np.dot(w, np.cos(states[:, 2])))
        centroid = Pose(cx, cy, cth)

        targets = to_absolute_many(d, states)
        r, th = to_relative_many(targets, centroid)
        mu_r = np.dot(w, r) / wsum
        var_r = np.dot(w, (r - mu_r) ** 2) / wsum + COV_FLOOR
        mu_th = math.atan2(np.dot(w, np.sin(th)), np.dot(w, np.cos(th)))
        dev = np.mod(th - mu_th + math.pi, 2.0 * math.pi) - math.pi
        var_th = np.dot(w, dev**2) / wsum + COV_FLOOR
        out.append(ClusterAbstraction(
            centroid, float(wsum / total_w),
            (float(mu_r), float(wrap_bearing(mu_th))),
            (float(var_r), float(var_th))))
    return out


# ---------------------------------------------------------------------------
# Density tree

@dataclass
class DetNode:
    bbox: tuple  # (xmin, xmax, ymin, ymax)
    density: float = 0.0
    count: int = 0
    split_dim: int = -1
    split_value: float = 0.0
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self):
        return self.split_dim < 0

    @property
    def area(self):
        xmin, xmax, ymin, ymax = self.bbox
        return (xmax - xmin) * (ymax - ymin)


@dataclass
class DensityTree:
    """Axis-aligned partition tree with piecewise-constant leaf densities."""

    nodes: list = field(default_factory=list)
    n_points: int = 0

    def leaves(self):
        return [n for n in self.nodes if n.is_leaf]


def _loo_term(n_members, area, n_total):
    # leave-one-out ISE contribution of a constant-density leaf
    t1 = n_members**2 / (n_total**2 * area)
    t2 = 2.0 * n_members * (n_members - 1) / (n_total * (n_total - 1) * area)
    return t1 - t2


def _best_split(pts, members, bbox, n_total, tries):
    """Best (gain, axis, cut) for one leaf over quantile candidate cuts."""
    xmin, xmax, ymin, ymax = bbox
    parent = _loo_term(members.shape[0], (xmax - xmin) * (ymax - ymin), n_total)
    best = None
    qs = (np.arange(tries) + 1.0) / (tries + 1.0)
    for axis, (lo, hi), other in ((0, (xmin, xmax), ymax - ymin),
                                  (1, (ymin, ymax), xmax - xmin)):
        vals = pts[members, axis]
        for cut in np.unique(np.quantile(vals, qs)):
            if not lo < cut < hi:
                continue
            n_left = int((vals <= cut).sum())
            if n_left == 0 or n_left == vals.shape[0]:
                continue
            gain = parent \
                - _loo_term(n_left, (cut - lo) * other, n_total) \
                - _loo_term(vals.shape[0] - n_left, (hi - cut) * other, n_total)
            if best is None or gain > best[0]:
                best = (gain, axis, float(cut))
    return best


def build_det(points, cfg: CompressionConfig) -> DensityTree:
    """Greedy density tree: repeatedly split the leaf whose best quantile
    cut maximizes the leave-one-out density-estimation gain, stopping at
    cfg.det_max_leaves or when no split improves the estimate."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("density tree needs at least 2 points")
    xmin, xmax = float(pts[:, 0].min()), float(pts[:, 0].max())
    ymin, ymax = float(pts[:, 1].min()), float(pts[:, 1].max())
    # pad degenerate extents so the root has positive area
    if xmax - xmin < _MIN_SIDE:
        mid = 0.5 * (xmin + xmax)
        xmin, xmax = mid - _MIN_SIDE / 2, mid + _MIN_SIDE / 2
    if ymax - ymin < _MIN_SIDE:
        mid = 0.5 * (ymin + ymax)
        ymin, ymax = mid - _MIN_SIDE / 2, mid + _MIN_SIDE / 2

    tree = DensityTree([DetNode((xmin, xmax, ymin, ymax), count=n)], n_points=n)
    members = {0: np.arange(n)}
    candidates = {0: _best_split(pts, members[0], tree.nodes[0].bbox, n, cfg.det_tries)}
    n_leaves = 1
    while n_leaves < cfg.det_max_leaves:
        live = [(i, c) for i, c in candidates.items() if c is not None]
        if not live:
            break
        i, (gain, axis, cut) = max(live, key=lambda item: item[1][0])
        if gain <= 0.0:
            break
        node = tree.nodes[i]
        xmin, xmax, ymin, ymax = node.bbox
        if axis == 0:
            lbox, rbox = (xmin, cut, ymin, ymax), (cut, xmax, ymin, ymax)
        else:
            lbox, rbox = (xmin, xmax, ymin, cut), (xmin, xmax, cut, ymax)
        idx = members.pop(i)
        mask = pts[idx, axis] <= cut
        li, ri = len(tree.nodes), len(tree.nodes) + 1
        tree.nodes.append(DetNode(lbox, count=int(mask.sum())))
        tree.nodes.append(DetNode(rbox, count=int((~mask).sum())))
        node.split_dim = axis
        node.split_value = cut
        node.left, node.right = li, ri
        members[li] = idx[mask]
        members[ri] = idx[~mask]
        del candidates[i]
        candidates[li] = _best_split(pts, members[li], lbox, n, cfg.det_tries)
        candidates[ri] = _best_split(pts, members[ri], rbox, n, cfg.det_tries)
        n_leaves += 1

    for node in tree.nodes:
        if node.is_leaf:
            node.density = (node.count / n) / node.area
    return tree


def query_det(tree: DensityTree, p) -> float:
    """Density of the leaf containing p; 0 outside the root bbox."""
    x, y = float(p[0]), float(p[1])
    root = tree.nodes[0]
    xmin, xmax, ymin, ymax = root.bbox
    if not (xmin <= x <= xmax and ymin <= y <= ymax):
        return 0.0
    node = root
    while not node.is_leaf:
        v = x if node.split_dim == 0 else y
        node = tree.nodes[node.left if v <= node.split_value else node.right]
    return node.density


def det_leaf_arrays(tree: DensityTree):
    """Leaf bboxes (T, 4) and densities (T,) in node order, the payload
    actually transmitted."""
    leaves = tree.leaves()
    bboxes = np.array([l.bbox for l in leaves], dtype=np.float64)
    densities = np.array([l.density for l in leaves], dtype=np.float64)
    return bboxes, densities


def det_density_at(bboxes, densities, points):
    """Evaluate a leaf-list density at (N, 2) points (first containing
    leaf wins; 0 outside)."""
    pts = np.asarray(points, dtype=np.float64)
    inside = ((pts[:, 0:1] >= bboxes[None, :, 0]) & (pts[:, 0:1] <= bboxes[None, :, 1])
              & (pts[:, 1:2] >= bboxes[None, :, 2]) & (pts[:, 1:2] <= bboxes[None, :, 3]))
    first = inside.argmax(axis=1)
    return np.where(inside.any(axis=1), np.asarray(densities)[first], 0.0)


# ---------------------------------------------------------------------------
# Kernel halving and root-thinning

def median_bandwidth(points, rng=None, max_points=256):
    """Median pairwise distance, computed on a subsample for large inputs.

    With an rng the subsample is drawn uniformly without replacement;
    otherwise an even stride is used (deterministic, for rng-free callers).
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n > max_points:
        if rng is not None:
            pts = pts[rng.choice(n, size=max_points, replace=False)]
        else:
            step = -(-n // max_points)
            pts = pts[::step]
    if pts.shape[0] < 2:
        return 1.0
    d = pdist(pts)
    med = float(np.median(d))
    if med > 0.0:
        return med
    mean = float(d.mean())
    return mean if mean > 0.0 else 1.0


def _resolve_bandwidth(points, kcfg: KernelConfig, rng=None):
    if kcfg.bandwidth is not None:
        return kcfg.bandwidth
    return median_bandwidth(points, rng)


def _halve_indices(pts, indices, h, rng):
    """One balanced-halving round over pts[indices]; returns the kept
    indices (one coreset chosen at random)."""
    sub = pts[indices]
    order = rng.permutation(indices.shape[0]).astype(np.int64)
    s1, s2 = kernels.kt_halve_assign(
        np.ascontiguousarray(sub[:, 0]), np.ascontiguousarray(sub[:, 1]),
        order, h)
    keep = s1 if rng.integers(2) == 0 else s2
    return indices[np.asarray(keep)]


def kt_halve(points, kcfg: KernelConfig, rng) -> np.ndarray:
    """Split the input into two balanced coresets by greedy pairwise
    assignment minimizing the inter-coreset MMD, and return one of them
    (chosen uniformly at random).  Output size is exactly N/2."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n % 2 != 0:
        raise ValueError("kernel halving needs an even number of points")
    h = _resolve_bandwidth(pts, kcfg, rng)
    return pts[_halve_indices(pts, np.arange(n), h, rng)]


def compresspp(points, cfg: CompressionConfig, kcfg: KernelConfig, rng) -> np.ndarray:
    """Root-thinning: reduce N points to exactly sqrt(n4) representatives,
    where n4 is the largest power of four <= N.

    The input is first truncated to n4 points by uniform subsampling, then
    compressed by the 4-way divide-and-halve recursion (subsets of size
    <= 4^g are kept whole) and finally halved down to sqrt(n4).
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 4:
        raise ValueError("root-thinning needs at least 4 points")
    n4 = 4
    while n4 * 4 <= n:
        n4 *= 4
    base = pts if n4 == n else pts[rng.choice(n, size=n4, replace=False)]
    h = _resolve_bandwidth(base, kcfg, rng)
    base_case = 4**cfg.oversample_g

    def compress(indices):
        m = indices.shape[0]
        if m <= base_case:
            return indices
        shuffled = indices[rng.permutation(m)]
        parts = np.array_split(shuffled, 4)
        kept = np.concatenate([compress(p) for p in parts])
        return _halve_indices(base, kept, h, rng)

    out = compress(np.arange(n4))
    target = math.isqrt(n4)
    while out.shape[0] > target:
        out = _halve_indices(base, out, h, rng)
    return base[out]


# ---------------------------------------------------------------------------
# Maximum mean discrepancy

def _mean_kernel(a, b, h, chunk=2048):
    """Mean of exp(-|x - y|^2 / (2 h^2)) over all pairs (blockwise)."""
    total = 0.0
    g = -0.5 / (h * h)
    for i0 in range(0, a.shape[0], chunk):
        ai = a[i0:i0 + chunk]
        for j0 in range(0, b.shape[0], chunk):
            bj = b[j0:j0 + chunk]
            d2 = ((ai[:, None, :] - bj[None, :, :]) ** 2).sum(axis=2)
            total += np.exp(g * d2).sum()
    return total / (a.shape[0] * b.shape[0])


def mmd(a, b, kcfg: KernelConfig) -> float:
    """Biased (V-statistic) maximum mean discrepancy between two point
    sets under the Gaussian kernel: sqrt(mean K(a,a) - 2 mean K(a,b) +
    mean K(b,b)), clamped at 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("mmd needs nonempty inputs")
    h = kcfg.bandwidth
    if h is None:
        h = median_bandwidth(np.vstack([a, b]))
    m2 = _mean_kernel(a, a, h) - 2.0 * _mean_kernel(a, b, h) + _mean_kernel(b, b, h)
    return math.sqrt(max(m2, 0.0))


# ---------------------------------------------------------------------------
# Symmetric fixture (four regions in a diamond plus one at the center)

def make_diamond_center(rng, points_per_region=20, spacing=2.0, half_width=0.4):
    """Point formation stressing clustering under symmetry: four square
    regions at the diamond corners plus one at the center.

    Returns (points, labels): ((5*ppr, 2) float array, (5*ppr,) int array).
    """
    centers = np.array([[0.0, spacing], [spacing, 0.0],
                        [0.0, -spacing], [-spacing, 0.0], [0.0, 0.0]])
    points = []
    labels = []
    for i, c in enumerate(centers):
        offsets = rng.uniform(-half_width, half_width, size=(points_per_region, 2))
        points.append(c + offsets)
        labels.append(np.full(points_per_region, i))
    return np.vstack(points), np.concatenate(labels)
