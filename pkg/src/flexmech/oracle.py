"""Shooting-method reference solution for the bar and the assembled mechanism.

This path integrates ``EI dtheta/ds = m``, ``dm/ds = -F cos(theta)`` directly
(RK4, fixed step) and never touches the Gamma integral, so it is an
independent check on :mod:`flexmech.mechanism`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .core import DomainError, MechanismConfig
from .elastica import HALF_PI, BarSolution
from .mechanism import MomentBreakdown, assemble, bent_length, spring_moment, spring_states

DEFAULT_STEPS = 400
RICHARDSON_FLAG = 1e-9


class ShootingError(RuntimeError):
    def __init__(self, message: str, bracket: tuple[float, float]):
        self.bracket = bracket
        super().__init__(f"{message}; final bracket [{bracket[0]!r}, {bracket[1]!r}]")


@dataclass(frozen=True)
class ShootingResult:
    tip_angle: float
    base_moment: float
    shape: np.ndarray | None  # columns s, x, y, theta
    iterations: int
    residual: float  # tip-moment mismatch relative to the load scale
    n_steps: int
    tip_x: float
    tip_y: float

    @property
    def tip_shortening(self) -> float:
        if self.shape is not None:
            return float(self.shape[-1, 0] - self.tip_x)
        raise AttributeError("shape not kept")


def shoot_single_bar(
    tip_force: float,
    tip_moment: float,
    bent_length: float,
    rigidity: float,
    n_steps: int = DEFAULT_STEPS,
    *,
    rtol: float = 1e-10,
    max_iter: int = 200,
    keep_shape: bool = True,
    min_steps: int = 100,
) -> ShootingResult:
    """Clamped bar with a dead tip force (normal to the undeformed axis) and a tip moment.

    Bisects on the base moment until the internal moment at the tip equals
    ``tip_moment`` to ``rtol`` relative to ``max(|tip_moment|, |F| L)``.
    ``min_steps`` may be lowered for convergence studies.
    """
    if rigidity <= 0.0 or bent_length <= 0.0:
        raise DomainError("rigidity and bent_length must be positive")
    if n_steps < min_steps:
        raise DomainError(f"n_steps must be >= {min_steps}, got {n_steps!r}")
    m0, x, y, th, res, its, lo, hi, ok = kernels.shoot(
        tip_force, tip_moment, bent_length, rigidity, n_steps, rtol, max_iter
    )
    if not ok:
        raise ShootingError(f"no convergence after {its} bisection steps", (lo, hi))
    scale = max(abs(tip_moment), abs(tip_force) * bent_length, 1e-300)
    shape = None
    if keep_shape:
        shape = kernels.rk4_profile(tip_force, m0, bent_length, rigidity, n_steps)[:, :4]
    return ShootingResult(
        tip_angle=th,
        base_moment=m0,
        shape=shape,
        iterations=its,
        residual=res / scale,
        n_steps=n_steps,
        tip_x=x,
        tip_y=y,
    )


@dataclass(frozen=True)
class RichardsonEstimate:
    estimate: float
    flagged: bool


def richardson_check(result_n: ShootingResult, result_2n: ShootingResult) -> RichardsonEstimate:
    """Error estimate ``|theta_2n - theta_n| / 15`` for a 4th-order scheme."""
    if result_2n.n_steps != 2 * result_n.n_steps:
        raise DomainError(
            f"second result must use twice the steps ({result_n.n_steps} -> {result_2n.n_steps})"
        )
    est = abs(result_2n.tip_angle - result_n.tip_angle) / 15.0
    return RichardsonEstimate(est, est > RICHARDSON_FLAG)


def _shoot_layer(
    layer_index: int,
    theta_0: float,
    config: MechanismConfig,
    share: float,
    n_steps: int,
) -> BarSolution:
    length = bent_length(layer_index, theta_0, config)
    ei = config.rigidity
    ecc = config.eccentricity

    def shot(force: float) -> ShootingResult:
        return shoot_single_bar(force, force * ecc - share, length, ei, n_steps, keep_shape=False)

    def miss(force: float) -> float:
        return shot(force).tip_angle - theta_0

    # linear-theory estimate of the load, then expand until bracketed
    guess = (theta_0 * ei / length + share) / (0.5 * length + ecc)
    hi = max(1.5 * guess, 1e-9)
    for _ in range(60):
        if miss(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise ShootingError("could not bracket the tip force", (0.0, hi))
    force = brentq(miss, 0.0, hi, xtol=1e-14, rtol=1e-13, maxiter=200)
    res = shot(force)
    theta_m = (force * ecc - share) * length / ei
    return BarSolution(
        layer_index=layer_index,
        theta_0=theta_0,
        theta_force=theta_0 - theta_m,
        theta_moment=theta_m,
        base_moment=res.base_moment,
        bent_length=length,
        tip_shortening=length - res.tip_x,
        tip_force=force,
    )


def oracle_assistive_moment(
    theta_0: float, config: MechanismConfig, n_steps: int = DEFAULT_STEPS
) -> MomentBreakdown:
    """Mechanism moment balance with every bar solved by shooting.

    Per layer the tip force is found such that the shot tip angle equals
    ``theta_0``, with tip moment ``F * ecc - M_springs / n_bars``.
    """
    if not 0.0 <= theta_0 < HALF_PI:
        raise DomainError(f"theta_0 must lie in [0, pi/2), got {theta_0!r}")
    springs = spring_states(theta_0, config)
    total = spring_moment(springs, config)
    n_layers = config.layout.layer_count
    if theta_0 == 0.0:
        layers = [
            BarSolution(i, 0.0, 0.0, 0.0, 0.0, bent_length(i, 0.0, config), 0.0, 0.0)
            for i in range(1, n_layers + 1)
        ]
    else:
        share = total / config.layout.total_bars
        layers = [_shoot_layer(i, theta_0, config, share, n_steps) for i in range(1, n_layers + 1)]
    return assemble(theta_0, config, layers, springs)


def relative_deviation(closed: float, oracle: float) -> float:
    if oracle == 0.0:
        return 0.0 if closed == 0.0 else math.inf
    return abs(closed - oracle) / abs(oracle)
