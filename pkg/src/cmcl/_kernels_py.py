"""NumPy fallback implementations of the hot kernels.

Mirrors the compiled extension built from ``_kernels.pyx``; ``cmcl.kernels``
selects between the two at import time.  Both backends implement the same
contracts, but summation order differs, so results can drift by a few ulps.
"""

import numpy as np


def cast_rays(blocked, sx, sy, angles, max_cells):
    """Trace rays from one origin through a cell grid (lockstep DDA).

    blocked: (H, W) uint8, nonzero cells stop rays.
    sx, sy: origin in continuous cell coordinates (cell (ix, iy) spans
        [ix, ix+1) x [iy, iy+1); array index is blocked[iy, ix]).
    angles: (R,) ray directions in the grid frame, radians.
    max_cells: range cap in cell units.

    Returns (R,) float64 distances in cell units to the boundary of the
    first blocked cell entered, capped at max_cells.  Rays leaving the grid
    return max_cells.  The origin cell itself is never tested.
    """
    angles = np.asarray(angles, dtype=np.float64)
    h, w = blocked.shape
    n = angles.shape[0]

    dx = np.cos(angles)
    dy = np.sin(angles)
    step_x = np.where(dx > 0.0, 1, -1).astype(np.int64)
    step_y = np.where(dy > 0.0, 1, -1).astype(np.int64)
    with np.errstate(divide="ignore"):
        inv_dx = np.where(dx != 0.0, 1.0 / dx, np.inf)
        inv_dy = np.where(dy != 0.0, 1.0 / dy, np.inf)

    cx = np.full(n, int(np.floor(sx)), dtype=np.int64)
    cy = np.full(n, int(np.floor(sy)), dtype=np.int64)
    # parametric distance to the next vertical / horizontal cell boundary
    tmax_x = np.where(
        dx != 0.0, ((cx + (dx > 0.0)) - sx) * inv_dx, np.inf)
    tmax_y = np.where(
        dy != 0.0, ((cy + (dy > 0.0)) - sy) * inv_dy, np.inf)
    tdelta_x = np.abs(inv_dx)
    tdelta_y = np.abs(inv_dy)

    out = np.full(n, float(max_cells), dtype=np.float64)
    active = np.ones(n, dtype=bool)
    while active.any():
        take_x = tmax_x <= tmax_y
        t = np.where(take_x, tmax_x, tmax_y)
        cx = cx + np.where(take_x & active, step_x, 0)
        cy = cy + np.where(~take_x & active, step_y, 0)
        tmax_x = tmax_x + np.where(take_x, tdelta_x, 0.0)
        tmax_y = tmax_y + np.where(take_x, 0.0, tdelta_y)

        beyond = active & (t >= max_cells)
        active &= ~beyond

        off = active & ((cx < 0) | (cx >= w) | (cy < 0) | (cy >= h))
        active &= ~off

        if active.any():
            hit = np.zeros(n, dtype=bool)
            hit[active] = blocked[cy[active], cx[active]] != 0
            out[hit] = t[hit]
            active &= ~hit
    return out


def scan_loglik(px, py, ptheta, beam_r, beam_b, field, cap,
                res, gox, goy, gcos, gsin, sigma):
    """Beam-end log-likelihood of a scan for each particle pose.

    px, py, ptheta: (N,) particle poses in world frame.
    beam_r, beam_b: (B,) measured ranges and body-frame bearings of the
        beams actually scored (caller strides/filters them).
    field: (H, W) distance-to-nearest-obstacle in meters.
    cap: value used for endpoints falling outside the grid.
    res, gox, goy, gcos, gsin: grid geometry (resolution, world origin,
        cos/sin of the grid orientation).

    Returns (N,) float64 log-likelihoods: -sum_b d_b^2 / (2 sigma^2).
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    ptheta = np.asarray(ptheta, dtype=np.float64)
    h, w = field.shape

    ang = ptheta[:, None] + beam_b[None, :]
    ex = px[:, None] + beam_r[None, :] * np.cos(ang)
    ey = py[:, None] + beam_r[None, :] * np.sin(ang)
    # world -> grid cells
    rx = ex - gox
    ry = ey - goy
    fx = (gcos * rx + gsin * ry) / res
    fy = (-gsin * rx + gcos * ry) / res
    ix = np.floor(fx).astype(np.int64)
    iy = np.floor(fy).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    d = np.full(ix.shape, cap, dtype=np.float64)
    d[inside] = field[iy[inside], ix[inside]]
    return -np.sum(d * d, axis=1) / (2.0 * sigma * sigma)


def point_mixture_density(qx, qy, cx, cy, ia, ib, ic, norm):
    """Mean density over an equal-weight 2D Gaussian mixture.

    qx, qy: (N,) query points.  cx, cy: (M,) component centers.
    ia, ib, ic: entries of the shared inverse covariance [[ia, ib], [ib, ic]].
    norm: 1 / (2 pi sqrt(det Sigma)).

    Returns (N,) float64: (1/M) * sum_j norm * exp(-0.5 * quad_j).
    """
    qx = np.asarray(qx, dtype=np.float64)
    qy = np.asarray(qy, dtype=np.float64)
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    n = qx.shape[0]
    m = cx.shape[0]
    acc = np.zeros(n, dtype=np.float64)
    # chunk the component axis to bound temporary size at N x 512
    chunk = 512
    for j0 in range(0, m, chunk):
        dx = qx[:, None] - cx[None, j0:j0 + chunk]
        dy = qy[:, None] - cy[None, j0:j0 + chunk]
        quad = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
        acc += np.exp(-0.5 * quad).sum(axis=1)
    return acc * (norm / m)


def kt_halve_assign(x, y, order, h):
    """Greedy pairwise balanced split of a point set into two coresets.

    Points are consumed in the pairing given by ``order`` (an even-length
    index array): pair p is (order[2p], order[2p+1]).  Each pair is assigned
    one point per coreset, choosing the orientation that minimizes the
    squared MMD between the two coresets under a Gaussian kernel with
    bandwidth ``h`` (incremental kernel-sum update; ties keep pair order).

    Returns (s1, s2): int64 index arrays of length len(order)//2.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    order = np.asarray(order, dtype=np.int64)
    npairs = order.shape[0] // 2
    gamma = -0.5 / (h * h)

    s1 = np.empty(npairs, dtype=np.int64)
    s2 = np.empty(npairs, dtype=np.int64)
    s1x = np.empty(npairs)
    s1y = np.empty(npairs)
    s2x = np.empty(npairs)
    s2y = np.empty(npairs)
    for p in range(npairs):
        a = order[2 * p]
        b = order[2 * p + 1]
        ax, ay = x[a], y[a]
        bx, by = x[b], y[b]
        if p == 0:
            delta = 0.0
        else:
            u1 = np.exp(gamma * ((ax - s1x[:p]) ** 2 + (ay - s1y[:p]) ** 2)).sum()
            u2 = np.exp(gamma * ((ax - s2x[:p]) ** 2 + (ay - s2y[:p]) ** 2)).sum()
            v1 = np.exp(gamma * ((bx - s1x[:p]) ** 2 + (by - s1y[:p]) ** 2)).sum()
            v2 = np.exp(gamma * ((bx - s2x[:p]) ** 2 + (by - s2y[:p]) ** 2)).sum()
            # (u1 + v2) - (u2 + v1) compares MMD^2 of the two orientations
            delta = (u1 + v2) - (u2 + v1)
        if delta <= 0.0:
            s1[p], s2[p] = a, b
            s1x[p], s1y[p] = ax, ay
            s2x[p], s2y[p] = bx, by
        else:
            s1[p], s2[p] = b, a
            s1x[p], s1y[p] = bx, by
            s2x[p], s2y[p] = ax, ay
    return s1, s2
