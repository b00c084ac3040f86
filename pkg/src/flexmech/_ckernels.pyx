# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels. Call-compatible with ``_pykernels``."""
from libc.math cimport asinh, cos, fabs, sin, sinh, sqrt, M_PI

import numpy as np
cimport numpy as cnp

from ._pykernels import KernelConvergenceError

cnp.import_array()

cdef enum:
    GL_N = 10
cdef double GL_X[GL_N]
cdef double GL_W[GL_N]

_x, _w = np.polynomial.legendre.leggauss(GL_N)
for _i in range(GL_N):
    GL_X[_i] = _x[_i]
    GL_W[_i] = _w[_i]
GL_ORDER = GL_N


cdef double _composite(double va, double vb, double s0, double eps, long panels) nogil:
    cdef double h = (vb - va) / panels
    cdef double re = sqrt(eps)
    cdef double total = 0.0, start, t
    cdef long p
    cdef int k
    for p in range(panels):
        start = va + h * p
        for k in range(GL_N):
            t = re * sinh(start + 0.5 * h * (GL_X[k] + 1.0))
            total += GL_W[k] * 2.0 / sqrt(1.0 + s0 - t * t)
    return 0.5 * h * total


def gamma_quad(double theta_f0, double theta_0, double rtol=1e-10, int max_level=20):
    cdef double s0, a, b, gap, eps, re, va, vb, prev, cur
    cdef long panels = 1
    cdef int level
    if theta_f0 <= 0.0:
        return 0.0, 0
    s0 = sin(theta_0)
    gap = 2.0 * cos(0.5 * (theta_0 + theta_f0)) * sin(0.5 * (theta_0 - theta_f0))
    a = sqrt(gap) if gap > 0.0 else 0.0
    b = sqrt(s0)
    if b <= a:
        return 0.0, 0
    eps = 2.0 * sin(0.25 * M_PI - 0.5 * theta_0) ** 2
    re = sqrt(eps)
    va = asinh(a / re)
    vb = asinh(b / re)
    prev = _composite(va, vb, s0, eps, panels)
    for level in range(max_level):
        panels *= 2
        cur = _composite(va, vb, s0, eps, panels)
        if fabs(cur - prev) <= rtol * fabs(cur):
            return cur, panels
        prev = cur
    raise KernelConvergenceError(
        f"gamma quadrature did not reach rtol={rtol} with {panels} panels"
    )


cdef inline void _step(double *st, double force, double inv, double h) nogil:
    # st = [x, y, theta, m]
    cdef double th = st[2], m = st[3]
    cdef double c1 = cos(th), s1 = sin(th), k1t = m * inv, k1m = -force * c1
    cdef double t2 = th + 0.5 * h * k1t, m2 = m + 0.5 * h * k1m
    cdef double c2 = cos(t2), s2 = sin(t2), k2t = m2 * inv, k2m = -force * c2
    cdef double t3 = th + 0.5 * h * k2t, m3 = m + 0.5 * h * k2m
    cdef double c3 = cos(t3), s3 = sin(t3), k3t = m3 * inv, k3m = -force * c3
    cdef double t4 = th + h * k3t, m4 = m + h * k3m
    cdef double c4 = cos(t4), s4 = sin(t4), k4t = m4 * inv, k4m = -force * c4
    st[0] += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
    st[1] += h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
    st[2] += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    st[3] += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)


cdef void _integrate(double *st, double force, double m0, double length,
                     double rigidity, long n_steps) nogil:
    cdef double h = length / n_steps
    cdef double inv = 1.0 / rigidity
    cdef long i
    st[0] = 0.0
    st[1] = 0.0
    st[2] = 0.0
    st[3] = m0
    for i in range(n_steps):
        _step(st, force, inv, h)


def rk4_final(double force, double m0, double length, double rigidity, long n_steps):
    cdef double st[4]
    _integrate(st, force, m0, length, rigidity, n_steps)
    return st[0], st[1], st[2], st[3]


def rk4_profile(double force, double m0, double length, double rigidity, long n_steps):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_steps + 1, 5))
    cdef double st[4]
    cdef double h = length / n_steps
    cdef double inv = 1.0 / rigidity
    cdef long i
    st[0] = 0.0
    st[1] = 0.0
    st[2] = 0.0
    st[3] = m0
    out[0, 0] = 0.0
    out[0, 1] = 0.0
    out[0, 2] = 0.0
    out[0, 3] = 0.0
    out[0, 4] = m0
    for i in range(n_steps):
        _step(st, force, inv, h)
        out[i + 1, 0] = (i + 1) * h
        out[i + 1, 1] = st[0]
        out[i + 1, 2] = st[1]
        out[i + 1, 3] = st[2]
        out[i + 1, 4] = st[3]
    return out


def shoot(double force, double tip_moment, double length, double rigidity,
          long n_steps, double rtol=1e-10, int max_iter=200):
    cdef double span = fabs(force) * length
    cdef double scale = fabs(tip_moment)
    if span > scale:
        scale = span
    if scale < 1e-300:
        scale = 1e-300
    cdef double pad = 1e-6 * scale
    cdef double lo = tip_moment - span - pad
    cdef double hi = tip_moment + span + pad
    cdef double tol = rtol * scale
    cdef double m0 = 0.5 * (lo + hi)
    cdef double res = 0.0
    cdef double st[4]
    cdef int it
    st[0] = 0.0
    st[1] = 0.0
    st[2] = 0.0
    for it in range(1, max_iter + 1):
        m0 = 0.5 * (lo + hi)
        _integrate(st, force, m0, length, rigidity, n_steps)
        res = st[3] - tip_moment
        if fabs(res) <= tol:
            return m0, st[0], st[1], st[2], res, it, lo, hi, True
        if res > 0.0:
            hi = m0
        else:
            lo = m0
    return m0, st[0], st[1], st[2], res, max_iter, lo, hi, False
