"""Single-bar large-deflection relations.

Angles are in radians, lengths in metres, ``rigidity`` is EI in N m^2.
The force sub-problem is the dead-loaded cantilever elastica; the moment
sub-problem is constant curvature. The base moment combines both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import DomainError

HALF_PI = 0.5 * math.pi
ANGLE_CAP = HALF_PI - 1e-6
GAMMA_RTOL = 1e-10


@dataclass(frozen=True)
class BarSolution:
    """Per-layer bar state at one mechanism angle.

    ``theta_force`` is the tip angle of the force sub-problem and
    ``theta_moment`` the (possibly negative) constant-curvature part; they sum
    to the layer deflection ``theta_0``.
    """

    layer_index: int
    theta_0: float
    theta_force: float
    theta_moment: float
    base_moment: float
    bent_length: float
    tip_shortening: float
    tip_force: float


def gamma_integral(theta_f0: float, theta_0: float) -> float:
    r"""Integral of :math:`1/\sqrt{\sin\theta_0 - \sin\theta}` over ``[0, theta_f0]``.

    The inverse-square-root singularity at ``theta_f0 == theta_0`` is removed
    by the substitution :math:`\sin\theta = \sin\theta_0 - t^2`.
    """
    if not 0.0 <= theta_0 < HALF_PI:
        raise DomainError(f"theta_0 must lie in [0, pi/2), got {theta_0!r}")
    if not 0.0 <= theta_f0 <= theta_0:
        raise DomainError(f"theta_f0 must lie in [0, theta_0={theta_0!r}], got {theta_f0!r}")
    value, _ = kernels.gamma_quad(theta_f0, theta_0, GAMMA_RTOL)
    return value


def tip_force_from_angle(theta_f0: float, bent_length: float, rigidity: float) -> float:
    """Tip force that bends a cantilever of length ``bent_length`` to tip angle ``theta_f0``.

    From ``L sqrt(F/EI) = Gamma(theta, theta) / sqrt(2)``.
    """
    if bent_length <= 0.0 or rigidity <= 0.0:
        raise DomainError("bent_length and rigidity must be positive")
    g = gamma_integral(theta_f0, theta_f0)
    return rigidity * g * g / (2.0 * bent_length * bent_length)


def angle_from_tip_force(
    force: float, bent_length: float, rigidity: float, tol: float = 1e-12
) -> float:
    """Inverse of :func:`tip_force_from_angle` by bisection on ``[0, pi/2 - 1e-6]``."""
    if force < 0.0:
        raise DomainError(f"force must be non-negative, got {force!r}")
    if force == 0.0:
        return 0.0
    lo, hi = 0.0, ANGLE_CAP
    if tip_force_from_angle(hi, bent_length, rigidity) < force:
        raise DomainError("force exceeds what the elastica can carry below pi/2")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if tip_force_from_angle(mid, bent_length, rigidity) < force:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pure_moment_tip_angle(moment: float, bent_length: float, rigidity: float) -> float:
    """Constant-curvature tip angle ``M L / EI``."""
    if bent_length <= 0.0 or rigidity <= 0.0:
        raise DomainError("bent_length and rigidity must be positive")
    return moment * bent_length / rigidity


def bar_base_moment(
    theta_force: float,
    theta_moment: float,
    theta_0: float,
    bent_length: float,
    rigidity: float,
    form: str = "printed",
) -> float:
    r"""Base moment of one bar from the merged force/moment solution.

    ``EI/L * (Gamma(theta_force; ref) * sqrt(sin ref) + theta_moment)``

    With ``form="printed"`` the reference angle is the layer deflection
    ``theta_0``. That form is undefined once a negative moment part pushes
    ``theta_force`` above ``theta_0``; the force angle is used there, which
    agrees at ``theta_force == theta_0``. With ``form="consistent"`` the
    reference is always ``theta_force``, making the force term exactly the
    elastica base moment ``F (L - dx)``.
    """
    if bent_length <= 0.0:
        raise DomainError(f"bent_length must be positive, got {bent_length!r}")
    if theta_force < 0.0:
        raise DomainError(f"theta_force must be non-negative, got {theta_force!r}")
    if form == "consistent":
        ref = theta_force
    elif form == "printed":
        ref = max(theta_0, theta_force)
    else:
        raise DomainError(f"unknown form {form!r}")
    g = gamma_integral(theta_force, ref)
    return rigidity / bent_length * (g * math.sqrt(math.sin(ref)) + theta_moment)


def tip_shortening(
    theta_f0: float, theta_moment: float, bent_length: float, panels: int = 64
) -> float:
    """Axial shortening ``L - int_0^L cos(theta(s)) ds`` of the composed profile.

    The profile is the force elastica with tip angle ``theta_f0`` plus a linear
    ramp reaching ``theta_moment`` at the tip. The elastica is parametrised by
    ``t = sqrt(sin theta_f0 - sin theta)`` so no singular weight appears.
    """
    if not 0.0 <= theta_f0 < HALF_PI:
        raise DomainError(f"theta_f0 must lie in [0, pi/2), got {theta_f0!r}")
    length = bent_length
    if theta_f0 == 0.0:
        if theta_moment == 0.0:
            return 0.0
        return length - length * math.sin(theta_moment) / theta_moment

    s0 = math.sin(theta_f0)
    gamma0 = gamma_integral(theta_f0, theta_f0)
    x, w = np.polynomial.legendre.leggauss(kernels.GL_ORDER)
    b = math.sqrt(s0)
    h = b / panels
    starts = h * np.arange(panels)
    nodes = starts[:, None] + 0.5 * h * (x[None, :] + 1.0)  # (panels, order)

    def dens(t):
        u = s0 - t * t
        return 2.0 / np.sqrt((1.0 - u) * (1.0 + u))

    panel_int = 0.5 * h * (dens(nodes) @ w)
    before = np.concatenate(([0.0], np.cumsum(panel_int)[:-1]))
    # partial integral from panel start to each node
    frac = 0.5 * (nodes - starts[:, None])  # half-width of [start, node]
    sub = starts[:, None, None] + frac[:, :, None] * (x[None, None, :] + 1.0)
    partial = frac * (dens(sub) @ w)
    g = before[:, None] + partial
    s = length * (1.0 - g / gamma0)
    theta = np.arcsin(s0 - nodes * nodes) + theta_moment * s / length
    proj = (length / gamma0) * 0.5 * h * float(((np.cos(theta) * dens(nodes)) @ w).sum())
    return length - proj
