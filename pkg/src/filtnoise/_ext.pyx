# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Fourier mode sums and periodic B-spline lookups.

Mirrors ``filtnoise._fallback``; see there for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, fmod, M_PI

cnp.import_array()


def mode_velocity(points, kvec, cos_w, sin_w):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef long long[:, ::1] k = np.ascontiguousarray(kvec, dtype=np.int64)
    cdef double[:, ::1] cw = np.ascontiguousarray(cos_w, dtype=np.float64)
    cdef double[:, ::1] sw = np.ascontiguousarray(sin_w, dtype=np.float64)
    cdef Py_ssize_t m = p.shape[0]
    cdef Py_ssize_t n = k.shape[0]
    out_arr = np.zeros((m, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if n == 0 or m == 0:
        return out_arr

    cdef long long kmax = 0
    cdef Py_ssize_t j
    for j in range(n):
        if abs(k[j, 0]) > kmax:
            kmax = abs(k[j, 0])
        if abs(k[j, 1]) > kmax:
            kmax = abs(k[j, 1])

    # e^{i q x} and e^{i q y} for q = 0..kmax, built by recurrence per point
    cdef double[::1] xr = np.empty(kmax + 1)
    cdef double[::1] xi = np.empty(kmax + 1)
    cdef double[::1] yr = np.empty(kmax + 1)
    cdef double[::1] yi = np.empty(kmax + 1)

    cdef Py_ssize_t i
    cdef long long q, kx, ky
    cdef double cx, sx, cy, sy, ar, ai, br, bi, c, s, sgn, ux, uy
    for i in range(m):
        cx = cos(p[i, 0])
        sx = sin(p[i, 0])
        cy = cos(p[i, 1])
        sy = sin(p[i, 1])
        xr[0] = 1.0
        xi[0] = 0.0
        yr[0] = 1.0
        yi[0] = 0.0
        for q in range(1, kmax + 1):
            xr[q] = xr[q - 1] * cx - xi[q - 1] * sx
            xi[q] = xr[q - 1] * sx + xi[q - 1] * cx
            yr[q] = yr[q - 1] * cy - yi[q - 1] * sy
            yi[q] = yr[q - 1] * sy + yi[q - 1] * cy
        ux = 0.0
        uy = 0.0
        for j in range(n):
            kx = k[j, 0]
            ky = k[j, 1]
            sgn = 1.0
            if kx < 0:
                kx = -kx
                ky = -ky
                sgn = -1.0
            ar = xr[kx]
            ai = xi[kx]
            br = yr[ky] if ky >= 0 else yr[-ky]
            bi = yi[ky] if ky >= 0 else -yi[-ky]
            c = ar * br - ai * bi
            s = sgn * (ar * bi + ai * br)
            ux += cw[j, 0] * c + sw[j, 0] * s
            uy += cw[j, 1] * c + sw[j, 1] * s
        out[i, 0] = ux
        out[i, 1] = uy
    return out_arr


cdef inline void _weights(double t, double* w) nogil:
    cdef double t2 = t * t
    cdef double t3 = t2 * t
    cdef double u = 1.0 - t
    w[0] = u * u * u / 6.0
    w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0
    w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0
    w[3] = t3 / 6.0


def spline_velocity(coef_u, coef_v, points):
    cdef double[:, ::1] cu = np.ascontiguousarray(coef_u, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(coef_v, dtype=np.float64)
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t g = cu.shape[0]
    cdef Py_ssize_t m = p.shape[0]
    out_arr = np.empty((m, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double two_pi = 2.0 * M_PI
    cdef double h = two_pi / g
    cdef double wx[4]
    cdef double wy[4]
    cdef Py_ssize_t gx[4]
    cdef Py_ssize_t gy[4]
    cdef Py_ssize_t i, a, b, ix, iy
    cdef double x, y, sx, sy, su, sv, w
    with nogil:
        for i in range(m):
            x = fmod(p[i, 0], two_pi)
            if x < 0:
                x += two_pi
            y = fmod(p[i, 1], two_pi)
            if y < 0:
                y += two_pi
            sx = x / h
            sy = y / h
            ix = <Py_ssize_t>floor(sx)
            iy = <Py_ssize_t>floor(sy)
            _weights(sx - ix, wx)
            _weights(sy - iy, wy)
            for a in range(4):
                gx[a] = (ix - 1 + a + g) % g
                gy[a] = (iy - 1 + a + g) % g
            su = 0.0
            sv = 0.0
            for a in range(4):
                for b in range(4):
                    w = wx[a] * wy[b]
                    su += w * cu[gx[a], gy[b]]
                    sv += w * cv[gx[a], gy[b]]
            out[i, 0] = su
            out[i, 1] = sv
    return out_arr
