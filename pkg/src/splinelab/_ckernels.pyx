# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; same signatures and results as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, exp, log

cnp.import_array()


cdef inline double _interp(const double[::1] v, Py_ssize_t n, double x0, double h, double x) noexcept nogil:
    cdef double u = (x - x0) / h
    cdef Py_ssize_t i
    cdef double t, f0, f1, f2, f3, tm, tp, t2
    if not (u > -1.0 and u < n):
        return 0.0
    i = <Py_ssize_t>floor(u)
    t = u - i
    f0 = v[i - 1] if 0 <= i - 1 < n else 0.0
    f1 = v[i] if 0 <= i < n else 0.0
    f2 = v[i + 1] if 0 <= i + 1 < n else 0.0
    f3 = v[i + 2] if 0 <= i + 2 < n else 0.0
    tm = t - 1.0
    tp = t + 1.0
    t2 = t - 2.0
    return (-t * tm * t2 * f0 / 6.0 + tp * tm * t2 * f1 / 2.0
            - tp * t * t2 * f2 / 2.0 + tp * t * tm * f3 / 6.0)


def interp_cubic(values, double x0, double h, x):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], S = xv.shape[0], s
    out = np.zeros(S)
    cdef double[::1] o = out
    with nogil:
        for s in range(S):
            o[s] = _interp(v, n, x0, h, xv[s])
    return out


def prog_table_sum(x, double origin, double step, long long count, values, double t0, double tg):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], S = xv.shape[0], s
    cdef double t_end = t0 + tg * (n - 1), y, acc
    cdef long long lo, hi, nu
    out = np.zeros(S)
    cdef double[::1] o = out
    if count <= 0:
        return out
    with nogil:
        for s in range(S):
            if count == 1:
                o[s] = _interp(v, n, t0, tg, xv[s] - origin)
                continue
            y = xv[s] - origin
            hi = <long long>floor((y - t0 + tg) / step)
            if hi > count - 1:
                hi = count - 1
            lo = <long long>ceil((y - t_end - tg) / step)
            if lo < 0:
                lo = 0
            acc = 0.0
            nu = lo
            while nu <= hi:
                acc = acc + _interp(v, n, t0, tg, xv[s] - (origin + nu * step))
                nu += 1
            o[s] = acc
    return out


def knot_sum(x, double h, long long o_origin, long long P, long long count, w, kvals,
             double k0, double kg, double kscale):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(kvals, dtype=np.float64)
    cdef Py_ssize_t S = xv.shape[0], L = wv.shape[0], nk = kv.shape[0], s
    cdef long long o, rel, nu, idx
    cdef double W
    out = np.zeros(S)
    cdef double[::1] res = out
    if count <= 0:
        return out
    with nogil:
        for s in range(S):
            o = <long long>floor(xv[s] / h + 0.5)
            rel = o - o_origin
            if rel < 0:
                continue
            nu = rel // P
            if nu > count - 1:
                nu = count - 1
            W = 0.0
            while nu >= 0:
                idx = rel - nu * P
                if idx >= L:
                    break
                W = W + wv[idx]
                nu -= 1
            if W != 0.0:
                res[s] = W * _interp(kv, nk, k0, kg, (xv[s] - o * h) * kscale)
    return out


def ppoly_eval(coeffs, long long theta_min, int grid_scale, x):
    cdef const double[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t S = xv.shape[0], npc = c.shape[0], deg = c.shape[1], s, j
    cdef double h = 2.0 ** -(grid_scale + 1), t, u, acc
    cdef long long i
    out = np.zeros(S)
    cdef double[::1] o = out
    with nogil:
        for s in range(S):
            t = floor(xv[s] / h)
            i = <long long>t - theta_min
            if i < 0 or i >= npc:
                continue
            u = xv[s] - t * h
            acc = c[i, deg - 1]
            for j in range(deg - 2, -1, -1):
                acc = acc * u + c[i, j]
            o[s] = acc
    return out


def bump_eval(poly, long long m, x):
    cdef const double[::1] p = np.ascontiguousarray(poly, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t S = xv.shape[0], npl = p.shape[0], s, j
    cdef double xx, ss, acc
    out = np.zeros(S)
    cdef double[::1] o = out
    with nogil:
        for s in range(S):
            xx = xv[s]
            ss = 1.0 - xx * xx
            if ss <= 1e-3:
                continue
            acc = 0.0
            for j in range(npl - 1, -1, -1):
                acc = acc * xx + p[j]
            o[s] = acc * exp(-1.0 / ss - 2.0 * m * log(ss))
    return out


def jump_sum(pos, knots, weights, double scale, poly, long long m, double radius):
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    z = scale * (pos[:, None] - np.asarray(knots, dtype=np.float64)) / radius
    vals = bump_eval(poly, m, z.ravel()).reshape(z.shape)
    return np.sum(np.asarray(weights) * vals, axis=1)
