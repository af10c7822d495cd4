# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels (see _kernels_py for docs)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, exp, floor, sin

cnp.import_array()


def cast_rays(const cnp.uint8_t[:, :] blocked, double sx, double sy,
              const double[:] angles, double max_cells):
    cdef Py_ssize_t n = angles.shape[0]
    cdef Py_ssize_t h = blocked.shape[0]
    cdef Py_ssize_t w = blocked.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i
    cdef double dx, dy, inv_dx, inv_dy, tmax_x, tmax_y, tdelta_x, tdelta_y, t
    cdef long cx, cy, step_x, step_y
    for i in range(n):
        dx = cos(angles[i])
        dy = sin(angles[i])
        cx = <long>floor(sx)
        cy = <long>floor(sy)
        step_x = 1 if dx > 0.0 else -1
        step_y = 1 if dy > 0.0 else -1
        if dx != 0.0:
            inv_dx = 1.0 / dx
            tmax_x = ((cx + (1 if dx > 0.0 else 0)) - sx) * inv_dx
            tdelta_x = inv_dx if inv_dx > 0.0 else -inv_dx
        else:
            tmax_x = INFINITY
            tdelta_x = INFINITY
        if dy != 0.0:
            inv_dy = 1.0 / dy
            tmax_y = ((cy + (1 if dy > 0.0 else 0)) - sy) * inv_dy
            tdelta_y = inv_dy if inv_dy > 0.0 else -inv_dy
        else:
            tmax_y = INFINITY
            tdelta_y = INFINITY

        out[i] = max_cells
        while True:
            if tmax_x <= tmax_y:
                t = tmax_x
                cx += step_x
                tmax_x += tdelta_x
            else:
                t = tmax_y
                cy += step_y
                tmax_y += tdelta_y
            if t >= max_cells:
                break
            if cx < 0 or cx >= w or cy < 0 or cy >= h:
                break
            if blocked[cy, cx] != 0:
                out[i] = t
                break
    return out_arr


def scan_loglik(const double[:] px, const double[:] py, const double[:] ptheta,
                const double[:] beam_r, const double[:] beam_b,
                const double[:, :] field, double cap, double res,
                double gox, double goy, double gcos, double gsin,
                double sigma):
    cdef Py_ssize_t n = px.shape[0]
    cdef Py_ssize_t nb = beam_r.shape[0]
    cdef Py_ssize_t h = field.shape[0]
    cdef Py_ssize_t w = field.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i, b
    cdef double ang, ex, ey, rx, ry, fx, fy, d, acc
    cdef long ix, iy
    cdef double inv2s2 = 1.0 / (2.0 * sigma * sigma)
    for i in range(n):
        acc = 0.0
        for b in range(nb):
            ang = ptheta[i] + beam_b[b]
            ex = px[i] + beam_r[b] * cos(ang)
            ey = py[i] + beam_r[b] * sin(ang)
            rx = ex - gox
            ry = ey - goy
            fx = (gcos * rx + gsin * ry) / res
            fy = (-gsin * rx + gcos * ry) / res
            ix = <long>floor(fx)
            iy = <long>floor(fy)
            if 0 <= ix < w and 0 <= iy < h:
                d = field[iy, ix]
            else:
                d = cap
            acc += d * d
        out[i] = -acc * inv2s2
    return out_arr


def point_mixture_density(const double[:] qx, const double[:] qy,
                          const double[:] cx, const double[:] cy,
                          double ia, double ib, double ic, double norm):
    cdef Py_ssize_t n = qx.shape[0]
    cdef Py_ssize_t m = cx.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, acc, scale = norm / m
    for i in range(n):
        acc = 0.0
        for j in range(m):
            dx = qx[i] - cx[j]
            dy = qy[i] - cy[j]
            acc += exp(-0.5 * (ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy))
        out[i] = acc * scale
    return out_arr


def kt_halve_assign(const double[:] x, const double[:] y, const long[:] order, double h):
    cdef Py_ssize_t npairs = order.shape[0] // 2
    s1_arr = np.empty(npairs, dtype=np.int64)
    s2_arr = np.empty(npairs, dtype=np.int64)
    cdef long[:] s1 = s1_arr
    cdef long[:] s2 = s2_arr
    s1x_arr = np.empty(npairs, dtype=np.float64)
    s1y_arr = np.empty(npairs, dtype=np.float64)
    s2x_arr = np.empty(npairs, dtype=np.float64)
    s2y_arr = np.empty(npairs, dtype=np.float64)
    cdef double[:] s1x = s1x_arr
    cdef double[:] s1y = s1y_arr
    cdef double[:] s2x = s2x_arr
    cdef double[:] s2y = s2y_arr
    cdef Py_ssize_t p, i
    cdef long a, b
    cdef double ax, ay, bx, by, u1, u2, v1, v2, delta, dx, dy
    cdef double gamma = -0.5 / (h * h)
    for p in range(npairs):
        a = order[2 * p]
        b = order[2 * p + 1]
        ax = x[a]
        ay = y[a]
        bx = x[b]
        by = y[b]
        if p == 0:
            delta = 0.0
        else:
            u1 = 0.0
            u2 = 0.0
            v1 = 0.0
            v2 = 0.0
            for i in range(p):
                dx = ax - s1x[i]
                dy = ay - s1y[i]
                u1 += exp(gamma * (dx * dx + dy * dy))
                dx = ax - s2x[i]
                dy = ay - s2y[i]
                u2 += exp(gamma * (dx * dx + dy * dy))
                dx = bx - s1x[i]
                dy = by - s1y[i]
                v1 += exp(gamma * (dx * dx + dy * dy))
                dx = bx - s2x[i]
                dy = by - s2y[i]
                v2 += exp(gamma * (dx * dx + dy * dy))
            delta = (u1 + v2) - (u2 + v1)
        if delta <= 0.0:
            s1[p] = a
            s2[p] = b
            s1x[p] = ax
            s1y[p] = ay
            s2x[p] = bx
            s2y[p] = by
        else:
            s1[p] = b
            s2[p] = a
            s1x[p] = bx
            s1y[p] = by
            s2x[p] = ax
            s2y[p] = ay
    return s1_arr, s2_arr
