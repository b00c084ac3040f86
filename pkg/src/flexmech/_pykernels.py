"""Pure-Python implementations of the numerical kernels.

These mirror ``_ckernels.pyx`` one-to-one and are used when the compiled
extension is unavailable (or when ``FLEXMECH_PURE_PYTHON=1``).
"""
from math import asinh, cos, pi, sin, sqrt

import numpy as np

GL_ORDER = 10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class KernelConvergenceError(ArithmeticError):
    pass


def _composite(va, vb, s0, eps, panels):
    h = (vb - va) / panels
    starts = va + h * np.arange(panels)
    v = (starts[:, None] + 0.5 * h * (_GL_X[None, :] + 1.0)).ravel()
    t = sqrt(eps) * np.sinh(v)
    vals = (2.0 / np.sqrt(1.0 + s0 - t * t)).reshape(panels, GL_ORDER)
    return 0.5 * h * float((vals @ _GL_W).sum())


def _gamma_limits(theta_f0, theta_0):
    """Integration limits in the sinh variable, plus sin(theta_0) and 1 - sin(theta_0)."""
    s0 = sin(theta_0)
    gap = 2.0 * cos(0.5 * (theta_0 + theta_f0)) * sin(0.5 * (theta_0 - theta_f0))
    a = sqrt(gap) if gap > 0.0 else 0.0
    b = sqrt(s0)
    eps = 2.0 * sin(0.25 * pi - 0.5 * theta_0) ** 2
    re = sqrt(eps)
    return asinh(a / re), asinh(b / re), s0, eps


def gamma_quad(theta_f0, theta_0, rtol=1e-10, max_level=20):
    """Integral of 1/sqrt(sin(theta_0) - sin(theta)) over [0, theta_f0].

    With t = sqrt(sin(theta_0) - sin(theta)) the endpoint singularity
    disappears and the integrand becomes 2 / sqrt((1 - u)(1 + u)),
    u = sin(theta_0) - t^2. The factor 1 - u = eps + t^2 (eps = 1 - sin theta_0)
    still peaks at t = 0 as theta_0 -> pi/2, so t = sqrt(eps) sinh(v) is used
    as the final variable. Composite Gauss-Legendre with panel doubling.
    Returns ``(value, panels)``.
    """
    if theta_f0 <= 0.0:
        return 0.0, 0
    va, vb, s0, eps = _gamma_limits(theta_f0, theta_0)
    if vb <= va:
        return 0.0, 0
    panels = 1
    prev = _composite(va, vb, s0, eps, panels)
    for _ in range(max_level):
        panels *= 2
        cur = _composite(va, vb, s0, eps, panels)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur, panels
        prev = cur
    raise KernelConvergenceError(
        f"gamma quadrature did not reach rtol={rtol} with {panels} panels"
    )


def rk4_final(force, m0, length, rigidity, n_steps):
    """Integrate the clamped elastica from the base; return (x, y, theta, m) at the tip."""
    h = length / n_steps
    x = y = th = 0.0
    m = m0
    inv = 1.0 / rigidity
    for _ in range(n_steps):
        c1 = cos(th)
        k1x, k1y, k1t, k1m = c1, sin(th), m * inv, -force * c1
        t2 = th + 0.5 * h * k1t
        m2 = m + 0.5 * h * k1m
        c2 = cos(t2)
        k2x, k2y, k2t, k2m = c2, sin(t2), m2 * inv, -force * c2
        t3 = th + 0.5 * h * k2t
        m3 = m + 0.5 * h * k2m
        c3 = cos(t3)
        k3x, k3y, k3t, k3m = c3, sin(t3), m3 * inv, -force * c3
        t4 = th + h * k3t
        m4 = m + h * k3m
        c4 = cos(t4)
        k4x, k4y, k4t, k4m = c4, sin(t4), m4 * inv, -force * c4
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        th += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        m += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    return x, y, th, m


def rk4_profile(force, m0, length, rigidity, n_steps):
    """Same integration as :func:`rk4_final` but keeps every node.

    Returns an ``(n_steps + 1, 5)`` array with columns s, x, y, theta, m.
    """
    out = np.empty((n_steps + 1, 5))
    h = length / n_steps
    x = y = th = 0.0
    m = m0
    inv = 1.0 / rigidity
    out[0] = (0.0, x, y, th, m)
    for i in range(n_steps):
        c1 = cos(th)
        k1x, k1y, k1t, k1m = c1, sin(th), m * inv, -force * c1
        t2 = th + 0.5 * h * k1t
        m2 = m + 0.5 * h * k1m
        c2 = cos(t2)
        k2x, k2y, k2t, k2m = c2, sin(t2), m2 * inv, -force * c2
        t3 = th + 0.5 * h * k2t
        m3 = m + 0.5 * h * k2m
        c3 = cos(t3)
        k3x, k3y, k3t, k3m = c3, sin(t3), m3 * inv, -force * c3
        t4 = th + h * k3t
        m4 = m + h * k3m
        c4 = cos(t4)
        k4x, k4y, k4t, k4m = c4, sin(t4), m4 * inv, -force * c4
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        th += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        m += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        out[i + 1] = ((i + 1) * h, x, y, th, m)
    return out


def shoot(force, tip_moment, length, rigidity, n_steps, rtol=1e-10, max_iter=200):
    """Bisect on the base moment until the internal tip moment equals ``tip_moment``.

    The base moment of a dead-loaded cantilever lies within
    ``tip_moment +/- force * length``, which gives a guaranteed bracket.
    Returns ``(m0, x, y, theta, residual, iterations, lo, hi, converged)``.
    """
    span = abs(force) * length
    scale = max(abs(tip_moment), span, 1e-300)
    pad = 1e-6 * scale
    lo = tip_moment - span - pad
    hi = tip_moment + span + pad
    tol = rtol * scale
    m0 = 0.5 * (lo + hi)
    x = y = th = res = 0.0
    for it in range(1, max_iter + 1):
        m0 = 0.5 * (lo + hi)
        x, y, th, m_tip = rk4_final(force, m0, length, rigidity, n_steps)
        res = m_tip - tip_moment
        if abs(res) <= tol:
            return m0, x, y, th, res, it, lo, hi, True
        if res > 0.0:
            hi = m0
        else:
            lo = m0
    return m0, x, y, th, res, max_iter, lo, hi, False
