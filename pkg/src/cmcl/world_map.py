"""Occupancy-grid world model.

ASCII map parsing, Euclidean distance transform for the beam-end sensor
model, ray casting, and the transforms between relative (range, bearing)
detections and absolute positions.

All types here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

_CELL_CHARS = {".": FREE, "#": OCCUPIED, "?": UNKNOWN}

TWO_PI = 2.0 * math.pi


class MapFormatError(ValueError):
    """Malformed ASCII map document."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


def wrap_angle(theta):
    """Normalize an angle to [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return t if t < TWO_PI else 0.0


def wrap_bearing(theta):
    """Normalize an angle to (-pi, pi]."""
    t = math.fmod(theta + math.pi, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - math.pi


def angle_diff(a, b):
    """Signed smallest difference a - b in (-pi, pi]."""
    return wrap_bearing(a - b)


@dataclass(frozen=True)
class Pose:
    """Planar pose: position in meters, heading normalized to [0, 2*pi)."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def position(self):
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Detection:
    """Relative polar observation in the observer's body frame."""

    range: float
    bearing: float

    def __post_init__(self):
        if not self.range >= 0.0:
            raise ValueError(f"detection range must be >= 0, got {self.range}")
        object.__setattr__(self, "range", float(self.range))
        object.__setattr__(self, "bearing", wrap_bearing(float(self.bearing)))


class OccupancyGrid:
    """Immutable occupancy grid.

    ``cells`` is a (height, width) uint8 array of FREE/OCCUPIED/UNKNOWN with
    row index 0 at the origin corner (minimum y); ``origin`` is the world
    pose of the corner of cell (0, 0).
    """

    def __init__(self, resolution, origin, cells):
        cells = np.ascontiguousarray(cells, dtype=np.uint8)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError("grid must be 2D with at least one cell")
        if not resolution > 0.0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.origin = origin
        self.cells = cells
        self.cells.setflags(write=False)
        self.height, self.width = cells.shape
        self._cos = math.cos(origin.theta)
        self._sin = math.sin(origin.theta)
        # rays are stopped by anything that is not free
        self.blocked = np.ascontiguousarray(cells != FREE, dtype=np.uint8)
        self.blocked.setflags(write=False)
        free_iy, free_ix = np.nonzero(cells == FREE)
        self._free_ix = free_ix
        self._free_iy = free_iy

    @property
    def n_free(self):
        return self._free_ix.shape[0]

    def free_cells(self):
        """(ix, iy) integer arrays of the free cells."""
        return self._free_ix, self._free_iy

    def world_to_grid(self, x, y):
        """World coordinates -> continuous cell coordinates."""
        rx = np.asarray(x) - self.origin.x
        ry = np.asarray(y) - self.origin.y
        fx = (self._cos * rx + self._sin * ry) / self.resolution
        fy = (-self._sin * rx + self._cos * ry) / self.resolution
        return fx, fy

    def world_to_cell(self, x, y):
        fx, fy = self.world_to_grid(x, y)
        return (np.floor(fx).astype(np.int64), np.floor(fy).astype(np.int64))

    def cell_center(self, ix, iy):
        """Cell indices -> world coordinates of the cell center."""
        fx = (np.asarray(ix) + 0.5) * self.resolution
        fy = (np.asarray(iy) + 0.5) * self.resolution
        x = self.origin.x + self._cos * fx - self._sin * fy
        y = self.origin.y + self._sin * fx + self._cos * fy
        return x, y

    def in_bounds(self, x, y):
        fx, fy = self.world_to_grid(x, y)
        return (fx >= 0) & (fx < self.width) & (fy >= 0) & (fy < self.height)

    def state_at(self, x, y):
        """Cell state at a world position; OCCUPIED outside the grid."""
        ix, iy = self.world_to_cell(x, y)
        if np.isscalar(ix) or ix.ndim == 0:
            if 0 <= ix < self.width and 0 <= iy < self.height:
                return int(self.cells[iy, ix])
            return OCCUPIED
        out = np.full(ix.shape, OCCUPIED, dtype=np.uint8)
        ok = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        out[ok] = self.cells[iy[ok], ix[ok]]
        return out

    def is_free(self, x, y):
        return self.state_at(x, y) == FREE

    def free_area(self):
        """Total free area in square meters."""
        return self.n_free * self.resolution**2


def load_grid(text) -> OccupancyGrid:
    """Parse an ASCII map document.

    Format: header lines ``resolution: <float>`` and ``origin: <x> <y>
    <theta>``, a blank line, then one row of map characters per line
    (``.`` free, ``#`` occupied, ``?`` unknown).  Row 0 of the document is
    the maximum-y row.
    """
    lines = text.splitlines()
    resolution = None
    origin = Pose(0.0, 0.0, 0.0)
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line == "":
            i += 1
            break
        if ":" not in line:
            raise MapFormatError("expected 'key: value' header line", line=i + 1)
        key, _, value = line.partition(":")
        key = key.strip()
        if key == "resolution":
            try:
                resolution = float(value)
            except ValueError:
                raise MapFormatError("bad resolution value", line=i + 1) from None
            if not resolution > 0.0:
                raise MapFormatError("resolution must be positive", line=i + 1)
        elif key == "origin":
            parts = value.split()
            if len(parts) != 3:
                raise MapFormatError("origin needs '<x> <y> <theta>'", line=i + 1)
            try:
                ox, oy, oth = (float(p) for p in parts)
            except ValueError:
                raise MapFormatError("bad origin value", line=i + 1) from None
            origin = Pose(ox, oy, oth)
        else:
            raise MapFormatError(f"unknown header key {key!r}", line=i + 1)
        i += 1
    if resolution is None:
        raise MapFormatError("missing 'resolution:' header")

    rows = []
    first_row_line = None
    for j in range(i, len(lines)):
        row = lines[j].rstrip("\n")
        if row == "":
            if any(lines[k].strip() for k in range(j + 1, len(lines))):
                raise MapFormatError("blank line inside map body", line=j + 1)
            break
        if first_row_line is None:
            first_row_line = j + 1
        if rows and len(row) != len(rows[0]):
            raise MapFormatError(
                f"ragged row: expected {len(rows[0])} cells, got {len(row)}",
                line=j + 1)
        parsed = np.empty(len(row), dtype=np.uint8)
        for c, ch in enumerate(row):
            if ch not in _CELL_CHARS:
                raise MapFormatError(f"unknown cell character {ch!r}",
                                     line=j + 1, column=c + 1)
            parsed[c] = _CELL_CHARS[ch]
        rows.append(parsed)
    if not rows:
        raise MapFormatError("map body is empty")
    # document row 0 is the max-y row; internal row 0 is min-y
    cells = np.flipud(np.vstack(rows))
    return OccupancyGrid(resolution, origin, cells)


def load_grid_file(path) -> OccupancyGrid:
    with open(path, "r", encoding="utf-8") as f:
        return load_grid(f.read())


class DistanceField:
    """Per-cell Euclidean distance (meters) to the nearest occupied cell.

    Distances are measured between cell centers; maps without occupied
    cells get the finite cap (width + height) * resolution everywhere.
    """

    def __init__(self, grid: OccupancyGrid, values, cap):
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.values.setflags(write=False)
        self.cap = float(cap)

    def sample(self, x, y):
        """Distance value at a world position; the cap outside the grid."""
        ix, iy = self.grid.world_to_cell(x, y)
        if np.isscalar(ix) or ix.ndim == 0:
            if 0 <= ix < self.grid.width and 0 <= iy < self.grid.height:
                return float(self.values[iy, ix])
            return self.cap
        out = np.full(ix.shape, self.cap)
        ok = (ix >= 0) & (ix < self.grid.width) & (iy >= 0) & (iy < self.grid.height)
        out[ok] = self.values[iy[ok], ix[ok]]
        return out


def distance_field(grid: OccupancyGrid) -> DistanceField:
    """Exact Euclidean distance transform of the occupied cells."""
    cap = (grid.width + grid.height) * grid.resolution
    occupied = grid.cells == OCCUPIED
    if not occupied.any():
        return DistanceField(grid, np.full(grid.cells.shape, cap), cap)
    dist = ndimage.distance_transform_edt(~occupied) * grid.resolution
    return DistanceField(grid, dist, cap)


def raycast(grid: OccupancyGrid, origin: Pose, bearing, r_max) -> float:
    """Distance from ``origin`` along direction theta+bearing to the first
    non-free cell boundary, clamped to ``r_max``.

    Unknown cells block rays.  Raises ValueError if the origin is outside
    the grid or on a non-free cell.
    """
    return float(raycast_many(grid, origin, np.array([bearing]), r_max)[0])


def raycast_many(grid: OccupancyGrid, origin: Pose, bearings, r_max):
    """Vectorized raycast from a single pose; see ``raycast``."""
    fx, fy = grid.world_to_grid(origin.x, origin.y)
    fx = float(fx)
    fy = float(fy)
    if not (0 <= fx < grid.width and 0 <= fy < grid.height):
        raise ValueError("raycast origin is outside the grid")
    if grid.cells[int(fy), int(fx)] != FREE:
        raise ValueError("raycast origin is on a non-free cell")
    angles = np.asarray(bearings, dtype=np.float64) + (origin.theta - grid.origin.theta)
    max_cells = float(r_max) / grid.resolution
    dist = kernels.cast_rays(grid.blocked, fx, fy, angles, max_cells)
    return np.asarray(dist) * grid.resolution


def to_absolute(d: Detection, observer: Pose):
    """Relative detection -> absolute position implied by the observer pose."""
    a = observer.theta + d.bearing
    return np.array([observer.x + d.range * math.cos(a),
                     observer.y + d.range * math.sin(a)])


def to_absolute_many(d: Detection, states):
    """``to_absolute`` over an (N, 3) array of observer poses."""
    states = np.asarray(states, dtype=np.float64)
    a = states[:, 2] + d.bearing
    return np.column_stack([states[:, 0] + d.range * np.cos(a),
                            states[:, 1] + d.range * np.sin(a)])


def to_relative(p, observer: Pose) -> Detection:
    """Absolute position -> relative detection; inverse of ``to_absolute``.

    A position coinciding with the observer maps to (0, 0) by convention.
    """
    dx = float(p[0]) - observer.x
    dy = float(p[1]) - observer.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        return Detection(0.0, 0.0)
    return Detection(r, wrap_bearing(math.atan2(dy, dx) - observer.theta))


def to_relative_many(points, observer: Pose):
    """Vectorized ``to_relative``: returns (ranges, bearings) arrays."""
    points = np.asarray(points, dtype=np.float64)
    dx = points[:, 0] - observer.x
    dy = points[:, 1] - observer.y
    r = np.hypot(dx, dy)
    bearing = np.arctan2(dy, dx) - observer.theta
    bearing = np.mod(bearing + math.pi, TWO_PI)
    bearing = np.where(bearing <= 0.0, bearing + TWO_PI, bearing) - math.pi
    bearing = np.where(r == 0.0, 0.0, bearing)
    return r, bearing
