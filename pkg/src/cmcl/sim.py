"""Deterministic two-robot simulator.

Scenario generation (random start/goal, shortest paths, a detection
opportunity by construction), waypoint-following omnidirectional
kinematics, noisy odometry, raycast range scans, FoV/line-of-sight gated
robot detection, and the record/replay split: ``record_run`` produces a
strategy-agnostic sensor log, ``replay_run`` runs the localization filters
(and the belief exchange of one strategy) against it.

Everything is a pure function of (scenario, configs, seeds): replaying the
same inputs yields bit-identical logs.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .compress import CompressionConfig, KernelConfig
from .fusion import (DetectionModel, FusionStrategy, fuse,
                     reciprocal_sample, summarize_belief)
from .logs import DetectionEvent, MessageEvent, RunLog, ScanEvent, SensorLog
from .mcl import (MclConfig, MclFilter, OdometryDelta, Scan, init_gaussian,
                  init_uniform, resample_low_variance)
from .wire import decode, encode
from .world_map import (Detection, OccupancyGrid, Pose, distance_field,
                        load_grid_file, raycast, raycast_many, wrap_bearing)


@dataclass(frozen=True)
class LidarSpec:
    n_beams: int = 180
    fov: float = 2.0 * math.pi
    r_max: float = 12.0
    rate: float = 6.0
    range_noise_sigma: float = 0.02

    def bearings(self):
        b = np.arange(self.n_beams) * (self.fov / self.n_beams) - self.fov / 2.0
        return b


@dataclass(frozen=True)
class CameraSpec:
    fov: float = math.radians(102.0)
    rate: float = 5.0


@dataclass(frozen=True)
class DetectionNoise:
    range_scale: float = 0.05
    bearing_sigma: float = 0.03


@dataclass(frozen=True)
class SensorSpec:
    lidar: LidarSpec = field(default_factory=LidarSpec)
    camera: CameraSpec = field(default_factory=CameraSpec)
    detection_noise: DetectionNoise = field(default_factory=DetectionNoise)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    speed: float = 0.4
    omega_max: float = 2.0
    robot_radius: float = 0.16
    odom_noise: tuple = (0.05, 0.05, 0.05)
    a_init_sigma_xy: float = 0.15
    a_init_sigma_theta: float = 0.1


@dataclass
class RobotPlan:
    start: Pose
    goal: Pose
    waypoints: list  # [(x, y)] including start and goal positions


@dataclass
class Scenario:
    map_ref: str
    robot_a: RobotPlan
    robot_b: RobotPlan
    seed: int
    duration: float


class ScenarioError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Path planning

def _inflated_blocked(grid: OccupancyGrid, radius):
    """Boolean (H, W) mask of cells a robot center of this radius may not
    occupy.  Cached on the grid (immutable)."""
    cache = grid.__dict__.setdefault("_inflation_cache", {})
    key = round(radius / grid.resolution, 6)
    if key not in cache:
        free = grid.blocked == 0
        dist = ndimage.distance_transform_edt(free) * grid.resolution
        cache[key] = ~free | (dist <= radius)
    return cache[key]


def _segment_clear(blocked, grid, p, q):
    """All cells under the segment p->q are outside the inflated mask."""
    dist = math.hypot(q[0] - p[0], q[1] - p[1])
    n = max(2, int(dist / (grid.resolution * 0.5)) + 1)
    xs = np.linspace(p[0], q[0], n)
    ys = np.linspace(p[1], q[1], n)
    ix, iy = grid.world_to_cell(xs, ys)
    ok = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
    if not ok.all():
        return False
    return not blocked[iy, ix].any()


_NEIGHBORS = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
              (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)),
              (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2))]


def plan_path(grid: OccupancyGrid, start: Pose, goal: Pose,
              robot_radius: float = 0.16) -> list:
    """8-connected A* on the obstacle-inflated grid, simplified to
    line-of-sight waypoints.  Returns [(x, y)] from start to goal."""
    blocked = _inflated_blocked(grid, robot_radius)
    six, siy = (int(v) for v in grid.world_to_cell(start.x, start.y))
    gix, giy = (int(v) for v in grid.world_to_cell(goal.x, goal.y))
    for name, ix, iy in (("start", six, siy), ("goal", gix, giy)):
        if not (0 <= ix < grid.width and 0 <= iy < grid.height) or blocked[iy, ix]:
            raise ScenarioError(f"{name} pose is not on free (inflated) space")
    if (six, siy) == (gix, giy):
        return [(start.x, start.y)]

    h = lambda ix, iy: math.hypot(ix - gix, iy - giy)
    open_q = [(h(six, siy), 0.0, (six, siy))]
    g_score = {(six, siy): 0.0}
    came = {}
    found = False
    while open_q:
        _, g, cur = heapq.heappop(open_q)
        if cur == (gix, giy):
            found = True
            break
        if g > g_score.get(cur, math.inf):
            continue
        cx, cy = cur
        for dx, dy, cost in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < grid.width and 0 <= ny < grid.height):
                continue
            if blocked[ny, nx]:
                continue
            if dx and dy and (blocked[cy, nx] or blocked[ny, cx]):
                continue  # no corner cutting
            ng = g + cost
            if ng < g_score.get((nx, ny), math.inf):
                g_score[(nx, ny)] = ng
                came[(nx, ny)] = cur
                heapq.heappush(open_q, (ng + h(nx, ny), ng, (nx, ny)))
    if not found:
        raise ScenarioError("goal is unreachable from start")

    cells = [(gix, giy)]
    while cells[-1] != (six, siy):
        cells.append(came[cells[-1]])
    cells.reverse()
    pts = [(start.x, start.y)]
    pts += [tuple(float(v) for v in grid.cell_center(ix, iy)) for ix, iy in cells[1:-1]]
    pts.append((goal.x, goal.y))

    # greedy line-of-sight shortcutting
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_clear(blocked, grid, pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def path_length(waypoints):
    return float(sum(math.hypot(q[0] - p[0], q[1] - p[1])
                     for p, q in zip(waypoints, waypoints[1:])))


# ---------------------------------------------------------------------------
# Detection

def simulate_detection(pose_a: Pose, pose_b: Pose, grid: OccupancyGrid,
                       spec: SensorSpec, rng) -> Detection | None:
    """Noisy relative detection of B from A, or None when B is outside the
    camera FoV or occluded."""
    dx = pose_b.x - pose_a.x
    dy = pose_b.y - pose_a.y
    r = math.hypot(dx, dy)
    if r < 1e-6:
        return None
    bearing = wrap_bearing(math.atan2(dy, dx) - pose_a.theta)
    if abs(bearing) > spec.camera.fov / 2.0:
        return None
    hit = raycast(grid, pose_a, bearing, r)
    if hit < r - 0.5 * grid.resolution:
        return None
    noise = spec.detection_noise
    r_meas = max(r + rng.normal(0.0, 1.0) * (noise.range_scale * r), 0.0)
    b_meas = bearing + rng.normal(0.0, 1.0) * noise.bearing_sigma
    return Detection(r_meas, b_meas)


# ---------------------------------------------------------------------------
# Scenario generation

def _free_inflated_cells(grid, radius):
    blocked = _inflated_blocked(grid, radius)
    iy, ix = np.nonzero(~blocked)
    return ix, iy


def _walk_path(waypoints, step=0.25):
    """Sampled (x, y, heading) poses along a waypoint polyline."""
    poses = []
    for p, q in zip(waypoints, waypoints[1:]):
        seg = math.hypot(q[0] - p[0], q[1] - p[1])
        if seg < 1e-9:
            continue
        heading = math.atan2(q[1] - p[1], q[0] - p[0])
        n = max(1, int(seg / step))
        for k in range(n):
            f = k / n
            poses.append((p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1]), heading))
    if waypoints:
        last = waypoints[-1]
        heading = poses[-1][2] if poses else 0.0
        poses.append((last[0], last[1], heading))
    return poses


def generate_scenario(grid: OccupancyGrid, seed: int, spec: SensorSpec,
                      map_ref: str = "", sim: SimConfig = SimConfig(),
                      duration: float | None = None,
                      b_goal_max_dist: float | None = None,
                      anchor_frac: float = 0.7,
                      min_a_path: float = 3.0) -> Scenario:
    """Random scenario with a detection opportunity by construction: robot
    A gets a random start/goal shortest path; B starts somewhere visible
    (camera FoV + line of sight) from a pose in the first ``anchor_frac``
    of that path; B gets a random reachable goal."""
    rng = np.random.default_rng([seed, 0])
    ix, iy = _free_inflated_cells(grid, sim.robot_radius)
    if ix.shape[0] < 4:
        raise ScenarioError("map too small for two robots")

    def sample_pose():
        j = int(rng.integers(ix.shape[0]))
        x, y = grid.cell_center(ix[j], iy[j])
        return Pose(float(x), float(y), float(rng.uniform(0, 2 * math.pi)))

    failures = 0
    while failures < 1000:
        a_start = sample_pose()
        a_goal = sample_pose()
        if math.hypot(a_goal.x - a_start.x, a_goal.y - a_start.y) < min_a_path:
            failures += 1
            continue
        try:
            a_wp = plan_path(grid, a_start, a_goal, sim.robot_radius)
        except ScenarioError:
            failures += 1
            continue
        anchors = _walk_path(a_wp)
        anchors = anchors[:max(1, int(len(anchors) * anchor_frac))]

        b_start = None
        for _ in range(50):
            cand = sample_pose()
            seen = False
            for ax, ay, ah in anchors[::2]:
                apose = Pose(ax, ay, ah)
                d = math.hypot(cand.x - ax, cand.y - ay)
                if not 0.3 <= d <= spec.lidar.r_max:
                    continue
                bearing = wrap_bearing(math.atan2(cand.y - ay, cand.x - ax) - ah)
                if abs(bearing) > spec.camera.fov / 2.0:
                    continue
                if raycast(grid, apose, bearing, d) >= d - 0.5 * grid.resolution:
                    seen = True
                    break
            if seen:
                b_start = cand
                break
        if b_start is None:
            failures += 1
            continue

        b_plan = None
        for _ in range(50):
            cand = sample_pose()
            if math.hypot(cand.x - b_start.x, cand.y - b_start.y) < 0.5:
                continue
            try:
                wp = plan_path(grid, b_start, cand, sim.robot_radius)
            except ScenarioError:
                continue
            if b_goal_max_dist is not None and path_length(wp) > b_goal_max_dist:
                continue
            b_plan = RobotPlan(b_start, cand, wp)
            break
        if b_plan is None:
            failures += 1
            continue

        if duration is None:
            t_a = path_length(a_wp) / sim.speed
            duration = float(min(max(t_a + 30.0, 45.0), 150.0))
        return Scenario(map_ref, RobotPlan(a_start, a_goal, a_wp), b_plan,
                        seed, float(duration))
    raise ScenarioError("could not generate a scenario after 1000 attempts")


def scenario_to_text(sc: Scenario) -> str:
    def pose(p):
        return f"{p.x!r} {p.y!r} {p.theta!r}"

    def wps(w):
        return "; ".join(f"{x!r} {y!r}" for x, y in w)

    return "\n".join([
        f"map: {sc.map_ref}",
        f"seed: {sc.seed}",
        f"duration: {sc.duration!r}",
        f"robot_a_start: {pose(sc.robot_a.start)}",
        f"robot_a_goal: {pose(sc.robot_a.goal)}",
        f"robot_a_waypoints: {wps(sc.robot_a.waypoints)}",
        f"robot_b_start: {pose(sc.robot_b.start)}",
        f"robot_b_goal: {pose(sc.robot_b.goal)}",
        f"robot_b_waypoints: {wps(sc.robot_b.waypoints)}",
    ]) + "\n"


def scenario_from_text(text: str) -> Scenario:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        kv[key.strip()] = value.strip()

    def pose(key):
        x, y, th = (float(v) for v in kv[key].split())
        return Pose(x, y, th)

    def wps(key):
        out = []
        for part in kv[key].split(";"):
            x, y = (float(v) for v in part.split())
            out.append((x, y))
        return out

    return Scenario(
        kv["map"],
        RobotPlan(pose("robot_a_start"), pose("robot_a_goal"), wps("robot_a_waypoints")),
        RobotPlan(pose("robot_b_start"), pose("robot_b_goal"), wps("robot_b_waypoints")),
        int(kv["seed"]), float(kv["duration"]))


# ---------------------------------------------------------------------------
# Recording

class _PatrolRobot:
    """Waypoint follower that ping-pongs along its path until the run ends.

    Omnidirectional translation at constant speed toward the next waypoint;
    the heading turns toward the motion direction at a bounded rate.
    """

    def __init__(self, plan: RobotPlan, speed, omega_max):
        self.waypoints = list(plan.waypoints)
        self.pose = plan.start
        self.speed = speed
        self.omega_max = omega_max
        self._next = 1 if len(self.waypoints) > 1 else None

    def step(self, dt):
        x, y, th = self.pose.x, self.pose.y, self.pose.theta
        if self._next is not None:
            budget = self.speed * dt
            while budget > 1e-12 and self._next is not None:
                tx, ty = self.waypoints[self._next]
                d = math.hypot(tx - x, ty - y)
                if d <= budget:
                    x, y = tx, ty
                    budget -= d
                    if self._next + 1 < len(self.waypoints):
                        self._next += 1
                    else:  # patrol: turn around
                        self.waypoints.reverse()
                        self._next = 1 if len(self.waypoints) > 1 else None
                else:
                    x += (tx - x) / d * budget
                    y += (ty - y) / d * budget
                    budget = 0.0
            if self._next is not None:
                tx, ty = self.waypoints[self._next]
                if math.hypot(tx - x, ty - y) > 1e-9:
                    want = math.atan2(ty - y, tx - x)
                    err = wrap_bearing(want - th)
                    turn = max(-self.omega_max * dt, min(self.omega_max * dt, err))
                    th = th + turn
        self.pose = Pose(x, y, th)
        return self.pose


def _event_ticks(rate, duration, dt):
    """Tick indices closest to the event times k / rate."""
    out = []
    k = 1
    n_ticks = int(round(duration / dt))
    while True:
        tick = int(round(k / rate / dt))
        if tick > n_ticks:
            break
        out.append(tick)
        k += 1
    return out


def _noisy_odom(prev: Pose, cur: Pose, sigma, rng) -> OdometryDelta:
    dxw = cur.x - prev.x
    dyw = cur.y - prev.y
    c, s = math.cos(prev.theta), math.sin(prev.theta)
    dx = c * dxw + s * dyw
    dy = -s * dxw + c * dyw
    dth = wrap_bearing(cur.theta - prev.theta)
    trans = math.hypot(dx, dy)
    return OdometryDelta(
        dx + rng.normal(0.0, 1.0) * (sigma[0] * trans),
        dy + rng.normal(0.0, 1.0) * (sigma[1] * trans),
        dth + rng.normal(0.0, 1.0) * (sigma[2] * (abs(dth) + 0.1 * trans)))


def record_run(grid: OccupancyGrid, sc: Scenario, spec: SensorSpec,
               sim: SimConfig = SimConfig()) -> SensorLog:
    """Execute the scenario kinematics and sensors; no filters involved.

    The resulting sensor log is shared by every strategy replay, so all
    methods see identical noise realizations.
    """
    seed = sc.seed
    rng_odom_a = np.random.default_rng([seed, 1])
    rng_odom_b = np.random.default_rng([seed, 2])
    rng_lidar_a = np.random.default_rng([seed, 3])
    rng_lidar_b = np.random.default_rng([seed, 4])
    rng_detect = np.random.default_rng([seed, 5])

    robot_a = _PatrolRobot(sc.robot_a, sim.speed, sim.omega_max)
    robot_b = _PatrolRobot(sc.robot_b, sim.speed, sim.omega_max)
    bearings = spec.lidar.bearings()

    n_ticks = int(round(sc.duration / sim.dt))
    lidar_ticks = set(_event_ticks(spec.lidar.rate, sc.duration, sim.dt))
    camera_ticks = set(_event_ticks(spec.camera.rate, sc.duration, sim.dt))

    t = np.zeros(n_ticks + 1)
    gt_a = np.zeros((n_ticks + 1, 3))
    gt_b = np.zeros((n_ticks + 1, 3))
    odom_a = np.zeros((n_ticks + 1, 3))
    odom_b = np.zeros((n_ticks + 1, 3))
    gt_a[0] = (robot_a.pose.x, robot_a.pose.y, robot_a.pose.theta)
    gt_b[0] = (robot_b.pose.x, robot_b.pose.y, robot_b.pose.theta)
    scans = []
    detections = []

    def make_scan(pose, rng):
        ranges = raycast_many(grid, pose, bearings, spec.lidar.r_max)
        hit = ranges < spec.lidar.r_max
        noise = rng.normal(0.0, spec.lidar.range_noise_sigma, ranges.shape)
        ranges = np.where(hit, np.clip(ranges + noise, 0.0, spec.lidar.r_max),
                          spec.lidar.r_max)
        return ranges

    for i in range(1, n_ticks + 1):
        ti = i * sim.dt
        prev_a, prev_b = robot_a.pose, robot_b.pose
        pa = robot_a.step(sim.dt)
        pb = robot_b.step(sim.dt)
        for name, p in (("a", pa), ("b", pb)):
            if not grid.is_free(p.x, p.y):
                raise RuntimeError(
                    f"ground-truth robot {name} entered a non-free cell at t={ti}")
        ua = _noisy_odom(prev_a, pa, sim.odom_noise, rng_odom_a)
        ub = _noisy_odom(prev_b, pb, sim.odom_noise, rng_odom_b)
        t[i] = ti
        gt_a[i] = (pa.x, pa.y, pa.theta)
        gt_b[i] = (pb.x, pb.y, pb.theta)
        odom_a[i] = (ua.dx, ua.dy, ua.dtheta)
        odom_b[i] = (ub.dx, ub.dy, ub.dtheta)
        if i in lidar_ticks:
            scans.append(ScanEvent(ti, "a", make_scan(pa, rng_lidar_a)))
            scans.append(ScanEvent(ti, "b", make_scan(pb, rng_lidar_b)))
        if i in camera_ticks:
            d = simulate_detection(pa, pb, grid, spec, rng_detect)
            if d is not None:
                true_rel = wrap_bearing(math.atan2(pb.y - pa.y, pb.x - pa.x) - pa.theta)
                detections.append(DetectionEvent(
                    ti, math.hypot(pb.x - pa.x, pb.y - pa.y), true_rel,
                    d.range, d.bearing))

    meta = {
        "map": sc.map_ref,
        "seed": sc.seed,
        "duration": sc.duration,
        "dt": sim.dt,
        "n_beams": spec.lidar.n_beams,
        "lidar_fov": spec.lidar.fov,
        "r_max": spec.lidar.r_max,
        "lidar_rate": spec.lidar.rate,
        "camera_rate": spec.camera.rate,
        "range_scale": spec.detection_noise.range_scale,
        "bearing_sigma": spec.detection_noise.bearing_sigma,
        "speed": sim.speed,
        "robot_radius": sim.robot_radius,
        "a_start": [sc.robot_a.start.x, sc.robot_a.start.y, sc.robot_a.start.theta],
        "b_start": [sc.robot_b.start.x, sc.robot_b.start.y, sc.robot_b.start.theta],
    }
    return SensorLog(meta, t, gt_a, gt_b, odom_a, odom_b, scans, detections)


# ---------------------------------------------------------------------------
# Replay

def replay_run(grid: OccupancyGrid, slog: SensorLog,
               strategy: FusionStrategy | None, mcl_cfg: MclConfig,
               eval_seed: int = 0, sim: SimConfig = SimConfig(),
               snapshots: bool = False) -> RunLog:
    """Run both filters over a recorded sensor stream.

    Robot A starts localized (Gaussian around its true start pose), robot B
    delocalized (uniform over free space).  With ``strategy=None`` the
    detections are ignored: plain per-robot MCL.
    """
    meta = slog.meta
    dt = float(meta["dt"])
    seed = int(meta["seed"])
    df = distance_field(grid)
    rng_a = np.random.default_rng([eval_seed, seed, 10])
    rng_b = np.random.default_rng([eval_seed, seed, 11])
    rng_msg = np.random.default_rng([eval_seed, seed, 12])
    rng_rs = np.random.default_rng([eval_seed, seed, 13])

    a_start = Pose(*meta["a_start"])
    belief_a = init_gaussian(a_start, mcl_cfg.n_particles, sim.a_init_sigma_xy,
                             sim.a_init_sigma_theta, rng_a)
    filter_a = MclFilter(grid, df, mcl_cfg, rng_a, belief_a)
    filter_b = MclFilter(grid, df, mcl_cfg, rng_b,
                         init_uniform(grid, mcl_cfg.n_particles, rng_b))

    bearings = np.arange(meta["n_beams"]) * (meta["lidar_fov"] / meta["n_beams"]) \
        - meta["lidar_fov"] / 2.0
    r_max = float(meta["r_max"])

    scans_at = {}
    for s in slog.scans:
        scans_at.setdefault(round(s.t / dt), []).append(s)
    dets_at = {}
    for d in slog.detections:
        dets_at.setdefault(round(d.t / dt), []).append(d)

    n = len(slog.t)
    est_a = np.zeros((n, 3))
    est_b = np.zeros((n, 3))
    messages = []
    snaps = {} if snapshots else None
    seq = 0

    for i in range(n):
        if i > 0:
            filter_a.add_odometry(OdometryDelta(*slog.odom_a[i]))
            filter_b.add_odometry(OdometryDelta(*slog.odom_b[i]))
        for s in scans_at.get(i, ()):
            scan = Scan(s.ranges, bearings, r_max)
            (filter_a if s.robot == "a" else filter_b).add_scan(scan)
        if strategy is not None:
            for devent in dets_at.get(i, ()):
                d = Detection(devent.meas_range, devent.meas_bearing)
                heading = filter_a.estimate().theta
                msg = summarize_belief(filter_a.belief, d, strategy, rng_msg,
                                       sender_id=0, seq=seq)
                data = encode(msg)
                received = decode(data)
                model = DetectionModel.for_detection(
                    received.detection, heading,
                    meta["range_scale"], meta["bearing_sigma"])
                if snaps is not None:
                    snaps[f"pre_states_{seq}"] = filter_b.belief.states.copy()
                    snaps[f"pre_weights_{seq}"] = filter_b.belief.weights.copy()
                fused = fuse(filter_b.belief, received, model)
                if snaps is not None:
                    snaps[f"post_weights_{seq}"] = fused.weights.copy()
                if received.method == "det":
                    filter_b.belief = resample_low_variance(fused, rng_rs)
                else:
                    filter_b.belief = reciprocal_sample(fused, received, model,
                                                        strategy.alpha, rng_rs)
                messages.append(MessageEvent(float(slog.t[i]), seq, 0,
                                             float(heading), data))
                seq += 1
        ea = filter_a.estimate()
        eb = filter_b.estimate()
        est_a[i] = (ea.x, ea.y, ea.theta)
        est_b[i] = (eb.x, eb.y, eb.theta)

    run_meta = {
        "map": meta["map"],
        "seed": seed,
        "eval_seed": eval_seed,
        "duration": meta["duration"],
        "dt": dt,
        "strategy": strategy.tag if strategy else "mcl",
        "alpha": strategy.alpha if strategy else 0.0,
        "n_particles": mcl_cfg.n_particles,
        "range_scale": meta["range_scale"],
        "bearing_sigma": meta["bearing_sigma"],
    }
    return RunLog(run_meta, slog.t.copy(), slog.gt_a.copy(), slog.gt_b.copy(),
                  est_a, est_b, messages, snaps)


def run(grid: OccupancyGrid, sc: Scenario, spec: SensorSpec,
        strategy: FusionStrategy | None, mcl_cfg: MclConfig,
        sim: SimConfig = SimConfig(), eval_seed: int | None = None,
        snapshots: bool = False) -> RunLog:
    """Record the scenario and replay one strategy against it."""
    slog = record_run(grid, sc, spec, sim)
    return replay_run(grid, slog, strategy, mcl_cfg,
                      eval_seed if eval_seed is not None else sc.seed,
                      sim, snapshots)


# ---------------------------------------------------------------------------
# Bundled maps

_MAPS_DIR = Path(__file__).parent / "maps"
BUILTIN_PREFIX = "builtin:"


def resolve_map(ref: str) -> Path:
    """Map reference -> file path; ``builtin:<name>`` loads a bundled map."""
    if ref.startswith(BUILTIN_PREFIX):
        path = _MAPS_DIR / (ref[len(BUILTIN_PREFIX):] + ".txt")
    else:
        path = Path(ref)
    if not path.exists():
        raise FileNotFoundError(f"map not found: {ref} (looked at {path})")
    return path


def load_map(ref: str) -> OccupancyGrid:
    return load_grid_file(resolve_map(ref))
