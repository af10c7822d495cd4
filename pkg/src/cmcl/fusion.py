"""Collaborative belief update.

When a robot receives a detection message it (1) multiplies its particle
weights by the likelihood the message assigns to each particle position
(``fuse``) and (2) resamples, replacing a fraction alpha of the particles
with draws from the transmitted detection distribution
(``reciprocal_sample``).  Detections carry no orientation information, so
injected particles get uniform headings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .compress import (CompressionConfig, KernelConfig, build_det,
                       compresspp, det_density_at, det_leaf_arrays,
                       dnc_cluster, kmeans_cluster, project_samples)
from .mcl import Belief, resample_low_variance
from .wire import (BeliefSummary, CoresetPayload, DetPayload, KmeansPayload,
                   PosesPayload, ProrokPayload, TAG_BY_METHOD)
from .world_map import (Detection, TWO_PI, to_absolute_many,
                        to_relative_many)

# additive likelihood floor: keeps the multiplicative update well-defined
# when no particle overlaps the transmitted distribution
LIKELIHOOD_FLOOR = 1e-12

_SIGMA_MIN = 1e-3  # floor on detection noise std (meters / radians)


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionModel:
    """Gaussian detection noise.

    ``sigma`` is the Cartesian world-frame covariance used by the
    point-set and K-means fusion rules; range_scale/bearing_sigma describe
    the underlying polar noise (std range_scale * r radially, bearing_sigma
    radians tangentially).
    """

    sigma: np.ndarray
    range_scale: float = 0.05
    bearing_sigma: float = 0.03

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.shape != (2, 2) or not np.allclose(s, s.T):
            raise ValueError("sigma must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(s)[0] < -1e-12:
            raise ValueError("sigma must be positive semi-definite")
        if self.range_scale <= 0 or self.bearing_sigma <= 0:
            raise ValueError("noise scales must be positive")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def for_detection(cls, d: Detection, sender_heading: float,
                      range_scale: float = 0.05, bearing_sigma: float = 0.03):
        """Build the Cartesian covariance by linearizing the polar noise at
        the observed detection: std range_scale*r along the ray direction
        (sender_heading + bearing, world frame), r*bearing_sigma across it."""
        sr = max(range_scale * d.range, _SIGMA_MIN)
        st = max(d.range * bearing_sigma, _SIGMA_MIN)
        phi = sender_heading + d.bearing
        c, s = math.cos(phi), math.sin(phi)
        rot = np.array([[c, -s], [s, c]])
        sigma = rot @ np.diag([sr**2, st**2]) @ rot.T
        return cls(sigma, range_scale, bearing_sigma)

    def polar_variances(self, d: Detection):
        """(var_range, var_bearing) of the detection noise at range d.range."""
        sr = max(self.range_scale * d.range, _SIGMA_MIN)
        return sr**2, max(self.bearing_sigma, _SIGMA_MIN) ** 2


VALID_TAGS = tuple(TAG_BY_METHOD)


@dataclass(frozen=True)
class FusionStrategy:
    """A belief-exchange method plus its reciprocal-sampling fraction."""

    tag: str
    alpha: float = 0.06
    compression: CompressionConfig = field(default_factory=CompressionConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        if self.tag not in VALID_TAGS:
            raise ValueError(f"unknown strategy tag {self.tag!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.tag == "det" and self.alpha != 0.0:
            # the density-tree method has no reciprocal sampling step
            object.__setattr__(self, "alpha", 0.0)


def _invert_cov(sigma):
    """(ia, ib, ic, norm) of a 2x2 covariance, flooring it if singular."""
    s = np.asarray(sigma, dtype=np.float64)
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    while det <= 1e-18:
        s = s + np.eye(2) * max(1e-12, 1e-6 * max(s[0, 0], s[1, 1], 1e-6))
        det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    ia = s[1, 1] / det
    ib = -s[0, 1] / det
    ic = s[0, 0] / det
    return ia, ib, ic, 1.0 / (2.0 * math.pi * math.sqrt(det))


def detection_likelihood(xb, center, sigma) -> float:
    """Bivariate normal density of position xb about ``center``."""
    ia, ib, ic, norm = _invert_cov(sigma)
    dx = float(xb[0]) - float(center[0])
    dy = float(xb[1]) - float(center[1])
    quad = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
    return norm * math.exp(-0.5 * quad)


def _point_mixture(positions, points, sigma):
    """Equal-weight Gaussian mixture density at particle positions."""
    ia, ib, ic, norm = _invert_cov(sigma)
    pts = np.asarray(points, dtype=np.float64)
    return np.asarray(kernels.point_mixture_density(
        np.ascontiguousarray(positions[:, 0]),
        np.ascontiguousarray(positions[:, 1]),
        np.ascontiguousarray(pts[:, 0]),
        np.ascontiguousarray(pts[:, 1]),
        ia, ib, ic, norm))


def _gauss2_many(positions, mean, cov):
    ia, ib, ic, norm = _invert_cov(cov)
    dx = positions[:, 0] - float(mean[0])
    dy = positions[:, 1] - float(mean[1])
    quad = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
    return norm * np.exp(-0.5 * quad)


def _norm_pdf(x, var):
    return np.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)


def message_likelihood(b: Belief, msg: BeliefSummary, model: DetectionModel):
    """Per-particle likelihood assigned by the message's summary."""
    pos = b.positions
    p = msg.payload
    if msg.count() == 0:
        raise FusionError("empty summary payload")

    if isinstance(p, PosesPayload):
        # mixture of detection models, one per transmitted sender pose
        points = to_absolute_many(msg.detection, np.asarray(p.poses, dtype=np.float64))
        return _point_mixture(pos, points, model.sigma)
    if isinstance(p, CoresetPayload):
        return _point_mixture(pos, p.points, model.sigma)
    if isinstance(p, KmeansPayload):
        lik = np.zeros(b.n)
        for c in p.clusters():
            if c.weight > 0.0:
                lik += c.weight * _gauss2_many(pos, c.mean, np.asarray(c.cov, dtype=np.float64) + model.sigma)
        return lik
    if isinstance(p, ProrokPayload):
        var_r_det, var_b_det = model.polar_variances(msg.detection)
        lik = np.zeros(b.n)
        for c in p.clusters():
            if c.weight <= 0.0:
                continue
            r, th = to_relative_many(pos, c.centroid)
            mu_r, mu_th = c.detection_mean
            var_r, var_th = c.detection_var
            dev = np.mod(th - mu_th + math.pi, TWO_PI) - math.pi
            lik += c.weight * _norm_pdf(r - mu_r, var_r + var_r_det) \
                * _norm_pdf(dev, var_th + var_b_det)
        return lik
    if isinstance(p, DetPayload):
        return det_density_at(np.asarray(p.bboxes, dtype=np.float64),
                              np.asarray(p.densities, dtype=np.float64), pos)
    raise FusionError(f"unknown payload type {type(p).__name__}")


def fuse(b: Belief, msg: BeliefSummary, model: DetectionModel,
         strategy: FusionStrategy | None = None) -> Belief:
    """Multiply particle weights by the message likelihood (plus the
    floor) and renormalize."""
    if strategy is not None and strategy.tag != msg.method:
        raise FusionError(
            f"message method {msg.method!r} does not match strategy {strategy.tag!r}")
    lik = message_likelihood(b, msg, model)
    w = b.weights * (lik + LIKELIHOOD_FLOOR)
    return Belief(b.states, w / w.sum())


def _sample_detection_positions(msg: BeliefSummary, model: DetectionModel,
                                n, rng):
    """Draw n positions from the transmitted detection distribution."""
    p = msg.payload
    if isinstance(p, (PosesPayload, CoresetPayload)):
        if isinstance(p, PosesPayload):
            points = to_absolute_many(msg.detection,
                                      np.asarray(p.poses, dtype=np.float64))
        else:
            points = np.asarray(p.points, dtype=np.float64)
        centers = points[rng.integers(0, points.shape[0], size=n)]
        chol = np.linalg.cholesky(model.sigma + np.eye(2) * 1e-12)
        return centers + rng.standard_normal((n, 2)) @ chol.T
    if isinstance(p, KmeansPayload):
        weights = np.asarray(p.weights, dtype=np.float64)
        weights = weights / weights.sum()
        comp = rng.choice(weights.shape[0], size=n, p=weights)
        z = rng.standard_normal((n, 2))
        out = np.empty((n, 2))
        covs = np.asarray(p.covs, dtype=np.float64)
        means = np.asarray(p.means, dtype=np.float64)
        for j in np.unique(comp):
            sel = comp == j
            chol = np.linalg.cholesky(covs[j] + model.sigma + np.eye(2) * 1e-12)
            out[sel] = means[j] + z[sel] @ chol.T
        return out
    if isinstance(p, ProrokPayload):
        var_r_det, var_b_det = model.polar_variances(msg.detection)
        weights = np.asarray(p.weights, dtype=np.float64)
        weights = weights / weights.sum()
        comp = rng.choice(weights.shape[0], size=n, p=weights)
        z = rng.standard_normal((n, 2))
        out = np.empty((n, 2))
        dm = np.asarray(p.det_means, dtype=np.float64)
        dv = np.asarray(p.det_vars, dtype=np.float64)
        cents = np.asarray(p.centroids, dtype=np.float64)
        for i in range(n):
            j = comp[i]
            r = max(dm[j, 0] + z[i, 0] * math.sqrt(dv[j, 0] + var_r_det), 0.0)
            th = dm[j, 1] + z[i, 1] * math.sqrt(dv[j, 1] + var_b_det)
            a = cents[j, 2] + th
            out[i] = (cents[j, 0] + r * math.cos(a), cents[j, 1] + r * math.sin(a))
        return out
    raise FusionError(f"cannot sample from payload type {type(p).__name__}")


def reciprocal_sample(b: Belief, msg: BeliefSummary, model: DetectionModel,
                      alpha, rng) -> Belief:
    """Resample N particles, each slot independently taken from the
    message's detection distribution with probability alpha (uniform
    heading) and otherwise filled by low-variance resampling from b."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if msg.method == "det":
        raise FusionError("density-tree messages do not support reciprocal sampling")
    if alpha == 0.0:
        return resample_low_variance(b, rng)
    n = b.n
    inject = rng.random(n) < alpha
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(b.weights), positions, side="right")
    idx = np.minimum(idx, n - 1)
    states = b.states[idx].copy()
    n_inj = int(inject.sum())
    if n_inj > 0:
        xy = _sample_detection_positions(msg, model, n_inj, rng)
        theta = rng.uniform(0.0, TWO_PI, size=n_inj)
        states[inject, 0] = xy[:, 0]
        states[inject, 1] = xy[:, 1]
        states[inject, 2] = theta
    return Belief(states, np.full(n, 1.0 / n))


def _uniform_copy(b: Belief, rng) -> Belief:
    """Resampled copy with uniform weights (the summaries assume one)."""
    if b.is_uniform(tol=1e-9):
        return b
    return resample_low_variance(b, rng)


def summarize_belief(b: Belief, d: Detection, strategy: FusionStrategy,
                     rng, sender_id=0, seq=0) -> BeliefSummary:
    """Sender side: compress the belief for transmission per the strategy."""
    src = _uniform_copy(b, rng)
    tag = strategy.tag
    cfg = strategy.compression
    if tag == "naive":
        payload = PosesPayload(src.states.copy())
    elif tag == "std_thinning":
        k = cfg.thinning_k
        if k > src.n:
            raise FusionError(f"cannot thin {src.n} particles to {k}")
        payload = PosesPayload(src.states[rng.choice(src.n, size=k, replace=False)])
    elif tag == "kmeans":
        pts = project_samples(src, d)
        clusters = kmeans_cluster(pts, cfg.k_clusters, cfg.kmeans_iters, rng)
        payload = KmeansPayload(
            np.array([c.mean for c in clusters]),
            np.array([c.cov for c in clusters]),
            np.array([c.weight for c in clusters]))
    elif tag == "prorok":
        clusters = dnc_cluster(src, d, cfg.k_clusters)
        payload = ProrokPayload(
            np.array([[c.centroid.x, c.centroid.y, c.centroid.theta]
                      for c in clusters]),
            np.array([c.weight for c in clusters]),
            np.array([c.detection_mean for c in clusters]),
            np.array([c.detection_var for c in clusters]))
    elif tag == "det":
        pts = project_samples(src, d)
        tree = build_det(pts, cfg)
        bboxes, densities = det_leaf_arrays(tree)
        payload = DetPayload(bboxes, densities)
    elif tag == "compresspp":
        pts = project_samples(src, d)
        payload = CoresetPayload(compresspp(pts, cfg, strategy.kernel, rng))
    else:
        raise FusionError(f"unknown strategy tag {tag!r}")
    return BeliefSummary(tag, sender_id, seq, d, payload)
