"""Single-robot Monte Carlo localization.

Uniform global initialization, odometry prediction, beam-end scan
weighting against a distance field, effective-sample-size gated
low-variance resampling, and weighted-mean pose estimation.

Beliefs are treated as immutable: every operation returns a new Belief.
Randomized operations take an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .world_map import (DistanceField, OccupancyGrid, Pose, TWO_PI,
                        wrap_angle, wrap_bearing)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MclConfig:
    n_particles: int = 2000
    sigma_odom: tuple = (0.05, 0.05, 0.05)
    sigma_obs: float = 0.5
    r_max: float = 12.0
    trigger_xy: float = 0.05
    trigger_theta: float = 0.05
    beam_stride: int = 18
    resample_threshold_fraction: float = 0.5

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if min(self.sigma_odom) < 0 or self.sigma_obs <= 0 or self.r_max <= 0:
            raise ValueError("noise scales and r_max must be positive")
        if self.trigger_xy <= 0 or self.trigger_theta <= 0 or self.beam_stride < 1:
            raise ValueError("triggers and beam_stride must be positive")
        if not 0.0 < self.resample_threshold_fraction <= 1.0:
            raise ValueError("resample_threshold_fraction must be in (0, 1]")


@dataclass(frozen=True)
class OdometryDelta:
    """Body-frame motion increment (dx, dy in meters, dtheta in radians)."""

    dx: float
    dy: float
    dtheta: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)
                and math.isfinite(self.dtheta)):
            raise ValueError("odometry delta must be finite")

    def compose(self, other: "OdometryDelta") -> "OdometryDelta":
        """This increment followed by ``other`` (SE(2) composition)."""
        c = math.cos(self.dtheta)
        s = math.sin(self.dtheta)
        return OdometryDelta(self.dx + c * other.dx - s * other.dy,
                             self.dy + s * other.dx + c * other.dy,
                             self.dtheta + other.dtheta)

    def inverse(self) -> "OdometryDelta":
        c = math.cos(self.dtheta)
        s = math.sin(self.dtheta)
        return OdometryDelta(-(c * self.dx + s * self.dy),
                             -(-s * self.dx + c * self.dy),
                             -self.dtheta)


class Scan:
    """A set of range measurements with body-frame beam bearings."""

    def __init__(self, ranges, bearings, r_max):
        self.ranges = np.ascontiguousarray(ranges, dtype=np.float64)
        self.bearings = np.ascontiguousarray(bearings, dtype=np.float64)
        self.r_max = float(r_max)
        if self.ranges.shape != self.bearings.shape or self.ranges.ndim != 1:
            raise ValueError("ranges and bearings must be 1D of equal length")
        if self.ranges.shape[0] == 0:
            raise ValueError("scan must contain at least one beam")
        if (self.ranges < 0).any() or (self.ranges > self.r_max).any():
            raise ValueError("ranges must lie in [0, r_max]")
        self.ranges.setflags(write=False)
        self.bearings.setflags(write=False)

    def __len__(self):
        return self.ranges.shape[0]


@dataclass(frozen=True)
class Particle:
    pose: Pose
    weight: float


class Belief:
    """Weighted particle set over poses.

    ``states`` is an (N, 3) float64 array of (x, y, theta); ``weights`` is
    (N,) nonnegative.  Arrays are read-only; operations return new Beliefs.
    """

    def __init__(self, states, weights):
        states = np.ascontiguousarray(states, dtype=np.float64)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != 3 or states.shape[0] < 1:
            raise ValueError("states must be (N, 3) with N >= 1")
        if weights.shape != (states.shape[0],):
            raise ValueError("weights must be (N,)")
        if (weights < 0).any():
            raise ValueError("weights must be nonnegative")
        self.states = states
        self.weights = weights
        self.states.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self):
        return self.states.shape[0]

    @property
    def positions(self):
        return self.states[:, :2]

    @property
    def thetas(self):
        return self.states[:, 2]

    def particle(self, i) -> Particle:
        x, y, th = self.states[i]
        return Particle(Pose(x, y, th), float(self.weights[i]))

    def particles(self):
        return [self.particle(i) for i in range(self.n)]

    def is_uniform(self, tol=1e-12):
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= tol))


def init_uniform(grid: OccupancyGrid, n, rng) -> Belief:
    """Uniform belief over the free space: a uniformly chosen free cell,
    uniform position within it, heading uniform in [0, 2*pi)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ix, iy = grid.free_cells()
    if ix.shape[0] == 0:
        raise ValueError("map has no free cells")
    pick = rng.integers(0, ix.shape[0], size=n)
    fx = ix[pick] + rng.random(n)
    fy = iy[pick] + rng.random(n)
    c = math.cos(grid.origin.theta)
    s = math.sin(grid.origin.theta)
    x = grid.origin.x + (c * fx - s * fy) * grid.resolution
    y = grid.origin.y + (s * fx + c * fy) * grid.resolution
    theta = rng.uniform(0.0, TWO_PI, size=n)
    states = np.column_stack([x, y, theta])
    return Belief(states, np.full(n, 1.0 / n))


def init_gaussian(pose: Pose, n, sigma_xy, sigma_theta, rng) -> Belief:
    """Belief concentrated around a known pose (a tracked robot)."""
    x = pose.x + rng.normal(0.0, sigma_xy, size=n)
    y = pose.y + rng.normal(0.0, sigma_xy, size=n)
    theta = np.mod(pose.theta + rng.normal(0.0, sigma_theta, size=n), TWO_PI)
    return Belief(np.column_stack([x, y, theta]), np.full(n, 1.0 / n))


def predict(b: Belief, u: OdometryDelta, cfg: MclConfig, rng) -> Belief:
    """Compose every particle with the body-frame increment ``u`` plus
    motion noise; weights are unchanged.

    Noise is zero-mean Gaussian per axis with std sigma_odom[i] * m, where
    m is the translation magnitude for x and y and |dtheta| + 0.1 * m for
    theta.
    """
    trans = math.hypot(u.dx, u.dy)
    sx, sy, sth = cfg.sigma_odom
    std_x = sx * trans
    std_y = sy * trans
    std_th = sth * (abs(u.dtheta) + 0.1 * trans)
    n = b.n
    ddx = u.dx + rng.normal(0.0, 1.0, n) * std_x
    ddy = u.dy + rng.normal(0.0, 1.0, n) * std_y
    ddth = u.dtheta + rng.normal(0.0, 1.0, n) * std_th

    th = b.states[:, 2]
    c = np.cos(th)
    s = np.sin(th)
    x = b.states[:, 0] + c * ddx - s * ddy
    y = b.states[:, 1] + s * ddx + c * ddy
    theta = np.mod(th + ddth, TWO_PI)
    return Belief(np.column_stack([x, y, theta]), b.weights)


def scan_log_likelihood(states, scan: Scan, df: DistanceField, cfg: MclConfig):
    """Beam-end log-likelihood of ``scan`` for each pose in ``states``.

    Beams are subsampled by cfg.beam_stride; beams at or beyond r_max are
    skipped; endpoints outside the map contribute the distance-field cap.
    Returns an (N,) array: -sum_b d_b^2 / (2 sigma_obs^2).
    """
    states = np.asarray(states, dtype=np.float64)
    idx = np.arange(0, len(scan), cfg.beam_stride)
    keep = scan.ranges[idx] < min(cfg.r_max, scan.r_max)
    idx = idx[keep]
    if idx.shape[0] == 0:
        return np.zeros(states.shape[0])
    g = df.grid
    return np.asarray(kernels.scan_loglik(
        np.ascontiguousarray(states[:, 0]),
        np.ascontiguousarray(states[:, 1]),
        np.ascontiguousarray(states[:, 2]),
        np.ascontiguousarray(scan.ranges[idx]),
        np.ascontiguousarray(scan.bearings[idx]),
        df.values, df.cap, g.resolution,
        g.origin.x, g.origin.y,
        math.cos(g.origin.theta), math.sin(g.origin.theta),
        cfg.sigma_obs))


def weight_scan(b: Belief, scan: Scan, df: DistanceField, cfg: MclConfig) -> Belief:
    """Multiply particle weights by the beam-end scan likelihood and
    renormalize.  If every weight underflows to zero the belief is reset
    to uniform weights and the event is logged."""
    loglik = scan_log_likelihood(b.states, scan, df, cfg)
    # subtract the max before exponentiating; cancels in the normalization
    w = b.weights * np.exp(loglik - loglik.max())
    total = w.sum()
    if total <= 0.0 or not np.isfinite(total):
        log.warning("scan weighting underflowed; resetting to uniform weights")
        return Belief(b.states, np.full(b.n, 1.0 / b.n))
    return Belief(b.states, w / total)


def effective_sample_size(b: Belief) -> float:
    """ESS = 1 / sum(w^2) for normalized weights, in [1, N]."""
    return float(1.0 / np.sum(b.weights**2))


def resample_low_variance(b: Belief, rng) -> Belief:
    """Systematic (single random offset) resampling to N uniform-weight
    particles."""
    n = b.n
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(b.weights), positions, side="right")
    idx = np.minimum(idx, n - 1)  # guard against fp roundup at the tail
    return Belief(b.states[idx], np.full(n, 1.0 / n))


def estimate_pose(b: Belief) -> Pose:
    """Weighted mean position with circular weighted mean heading."""
    w = b.weights
    x = float(np.dot(w, b.states[:, 0]))
    y = float(np.dot(w, b.states[:, 1]))
    cs = float(np.dot(w, np.cos(b.states[:, 2])))
    sn = float(np.dot(w, np.sin(b.states[:, 2])))
    if math.hypot(cs, sn) < 1e-12:  # numerically zero resultant
        theta = 0.0
    else:
        theta = math.atan2(sn, cs)
    return Pose(x, y, wrap_angle(theta))


class MclFilter:
    """Buffered MCL update loop for one robot.

    Odometry increments are accumulated and applied (prediction + scan
    weighting + ESS-gated resampling) only once accumulated motion exceeds
    the configured trigger, so repeated observations of a stationary robot
    are not integrated twice.
    """

    def __init__(self, grid: OccupancyGrid, df: DistanceField, cfg: MclConfig,
                 rng, belief: Belief | None = None):
        self.grid = grid
        self.df = df
        self.cfg = cfg
        self.rng = rng
        self.belief = belief if belief is not None else init_uniform(
            grid, cfg.n_particles, rng)
        self._pending = OdometryDelta(0.0, 0.0, 0.0)
        self.n_updates = 0

    def add_odometry(self, u: OdometryDelta):
        self._pending = self._pending.compose(u)

    def motion_ready(self) -> bool:
        p = self._pending
        return (math.hypot(p.dx, p.dy) >= self.cfg.trigger_xy
                or abs(wrap_bearing(p.dtheta)) >= self.cfg.trigger_theta)

    def add_scan(self, scan: Scan):
        """Run one filter update if enough motion accumulated; returns True
        when an update happened."""
        if not self.motion_ready():
            return False
        self.belief = predict(self.belief, self._pending, self.cfg, self.rng)
        self._pending = OdometryDelta(0.0, 0.0, 0.0)
        self.belief = weight_scan(self.belief, scan, self.df, self.cfg)
        ess = effective_sample_size(self.belief)
        if ess < self.belief.n * self.cfg.resample_threshold_fraction:
            self.belief = resample_low_variance(self.belief, self.rng)
        self.n_updates += 1
        return True

    def estimate(self) -> Pose:
        return estimate_pose(self.belief)
