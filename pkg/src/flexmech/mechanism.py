"""System moment balance: per-layer bars plus preloaded springs.

Sign convention: ``moment_bars`` and ``moment_springs`` are the resisting
moments of the elastic elements (positive for positive bending), and
``moment_assist`` closes the balance, so it is negative. Its magnitude is
the restoring moment delivered to the head.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import Executor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import DomainError, ForceTerm, MechanismConfig, SpringMode
from .elastica import (
    ANGLE_CAP,
    HALF_PI,
    BarSolution,
    bar_base_moment,
    tip_force_from_angle,
    tip_shortening,
)

CURVE_COLUMNS = (
    "theta_rad",
    "theta_deg",
    "m_bars_nm",
    "m_springs_nm",
    "m_assist_nm",
    "f_assist_n",
    "preload_mm",
)


class SolidLengthError(DomainError):
    """Spring would be compressed beyond its usable travel."""


class ConstraintInfeasible(RuntimeError):
    """The force/moment split constraint has no sign change on its bracket."""

    def __init__(self, layer_index: int, theta_0: float, residual_lo: float, residual_hi: float):
        self.layer_index = layer_index
        self.theta_0 = theta_0
        self.residual_lo = residual_lo
        self.residual_hi = residual_hi
        super().__init__(
            f"layer {layer_index} at theta_0={theta_0:.6g} rad: no sign change "
            f"(residual {residual_lo:.6g} at 0, {residual_hi:.6g} at upper bound)"
        )


@dataclass(frozen=True)
class SpringState:
    layer_index: int
    compression: float
    force: float


@dataclass(frozen=True)
class MomentBreakdown:
    theta_0: float
    moment_bars: float
    moment_springs: float
    moment_assist: float
    force_assist: float
    per_layer: tuple[BarSolution, ...]
    springs: tuple[SpringState, ...]
    preload: float = 0.0

    @property
    def closure_residual(self) -> float:
        return self.moment_bars + self.moment_springs + self.moment_assist

    def row(self) -> dict[str, float]:
        return {
            "theta_rad": self.theta_0,
            "theta_deg": math.degrees(self.theta_0),
            "m_bars_nm": self.moment_bars,
            "m_springs_nm": self.moment_springs,
            "m_assist_nm": self.moment_assist,
            "f_assist_n": self.force_assist,
            "preload_mm": self.preload * 1e3,
        }

    def to_dict(self) -> dict:
        out = dict(self.row())
        out["per_layer"] = [asdict(s) for s in self.per_layer]
        out["springs"] = [asdict(s) for s in self.springs]
        return out


def spring_compression(
    layer_index: int, theta_0: float, separation: float, layer_count: int = 3
) -> float:
    """Compression of the springs in ``layer_index`` (1-based): ``(i - 1) * Sep * theta_0``."""
    if not 1 <= layer_index <= layer_count:
        raise DomainError(f"layer_index must lie in 1..{layer_count}, got {layer_index!r}")
    if theta_0 < 0.0:
        raise DomainError(f"theta_0 must be non-negative, got {theta_0!r}")
    return (layer_index - 1) * separation * theta_0


def spring_force(compression: float, config: MechanismConfig) -> float:
    """Force of one bar's spring set.

    ``offset``: ``K (preload + compression)`` once the bar slides at all.
    ``threshold``: ``K compression``. Both are zero at zero compression.
    """
    if compression < 0.0:
        raise DomainError(f"compression must be non-negative, got {compression!r}")
    spring = config.spring
    if config.preload + compression > spring.max_compression:
        raise SolidLengthError(
            f"preload {config.preload * 1e3:.3f} mm + compression {compression * 1e3:.3f} mm "
            f"exceeds max_compression {spring.max_compression * 1e3:.3f} mm"
        )
    if compression == 0.0:
        return 0.0
    if SpringMode(config.spring_mode) is SpringMode.OFFSET:
        return spring.stiffness * (config.preload + compression)
    return spring.stiffness * compression


def spring_states(theta_0: float, config: MechanismConfig) -> list[SpringState]:
    layout = config.layout
    states = []
    for i in range(1, layout.layer_count + 1):
        c = spring_compression(i, theta_0, layout.layer_separation, layout.layer_count)
        states.append(SpringState(i, c, spring_force(c, config)))
    return states


def spring_moment(states: Sequence[SpringState], config: MechanismConfig) -> float:
    """Total spring moment; each layer acts on a lever ``(i - 1) * Sep``."""
    sep = config.layout.layer_separation
    return sum(
        n * s.force * (s.layer_index - 1) * sep
        for n, s in zip(config.layout.bars_per_layer, states)
    )


def bent_length(layer_index: int, theta_0: float, config: MechanismConfig) -> float:
    """Bent portion of a layer's bars, shortened by the spring compression."""
    return config.bar.bendable_length - (layer_index - 1) * config.layout.layer_separation * theta_0


def constraint_residual(
    theta_force: float,
    theta_0: float,
    length: float,
    rigidity: float,
    eccentricity: float,
    spring_share: float,
) -> float:
    """Moment-split residual for one bar.

    ``EI/L (theta_M - Gamma^2 ecc / (2 L)) + M_spring / n_bars`` with
    ``theta_M = theta_0 - theta_force``. The ``Gamma^2 EI / (2 L^2)`` factor
    is the tip force, so the middle term is the eccentric tip moment.
    """
    force = tip_force_from_angle(theta_force, length, rigidity)
    return rigidity / length * (theta_0 - theta_force) - force * eccentricity + spring_share


def solve_layer(
    layer_index: int,
    theta_0: float,
    config: MechanismConfig,
    spring_total: float | None = None,
) -> BarSolution:
    """Split the layer deflection into force and moment parts and evaluate the bar.

    The root is searched on ``[0, theta_0]`` first. If the spring share is
    large enough to need a negative moment part, the bracket is widened
    towards ``pi/2``.
    """
    if not 0.0 <= theta_0 < HALF_PI:
        raise DomainError(f"theta_0 must lie in [0, pi/2), got {theta_0!r}")
    length = bent_length(layer_index, theta_0, config)
    ei = config.rigidity
    if theta_0 == 0.0:
        return BarSolution(layer_index, 0.0, 0.0, 0.0, 0.0, length, 0.0, 0.0)
    if spring_total is None:
        spring_total = spring_moment(spring_states(theta_0, config), config)
    share = spring_total / config.layout.total_bars
    ecc = config.eccentricity

    def resid(tf: float) -> float:
        return constraint_residual(tf, theta_0, length, ei, ecc, share)

    r_lo = resid(0.0)
    hi = theta_0
    r_hi = resid(hi)
    if r_lo == 0.0 and r_hi == 0.0:
        theta_f = theta_0
    elif r_lo == 0.0:
        theta_f = 0.0
    else:
        for frac in (0.125, 0.25, 0.5, 0.75, 0.9, 1.0):
            if r_lo * r_hi <= 0.0:
                break
            hi = theta_0 + (ANGLE_CAP - theta_0) * frac
            r_hi = resid(hi)
        if r_lo * r_hi > 0.0:
            raise ConstraintInfeasible(layer_index, theta_0, r_lo, r_hi)
        theta_f = hi if r_hi == 0.0 else brentq(resid, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=200)

    theta_m = theta_0 - theta_f
    return BarSolution(
        layer_index=layer_index,
        theta_0=theta_0,
        theta_force=theta_f,
        theta_moment=theta_m,
        base_moment=bar_base_moment(
            theta_f, theta_m, theta_0, length, ei, form=ForceTerm(config.force_term).value
        ),
        bent_length=length,
        tip_shortening=tip_shortening(theta_f, theta_m, length),
        tip_force=tip_force_from_angle(theta_f, length, ei),
    )


def assemble(
    theta_0: float,
    config: MechanismConfig,
    layers: Sequence[BarSolution],
    springs: Sequence[SpringState],
) -> MomentBreakdown:
    """Moment balance ``M_bars + M_springs + M_assist = 0`` from per-layer parts."""
    m_bars = sum(n * s.base_moment for n, s in zip(config.layout.bars_per_layer, layers))
    m_springs = spring_moment(springs, config)
    m_assist = -(m_bars + m_springs)
    return MomentBreakdown(
        theta_0=theta_0,
        moment_bars=m_bars,
        moment_springs=m_springs,
        moment_assist=m_assist,
        force_assist=m_assist / config.lever_arm,
        per_layer=tuple(layers),
        springs=tuple(springs),
        preload=config.preload,
    )


def assistive_moment(theta_0: float, config: MechanismConfig) -> MomentBreakdown:
    if not 0.0 <= theta_0 < HALF_PI:
        raise DomainError(f"theta_0 must lie in [0, pi/2), got {theta_0!r}")
    springs = spring_states(theta_0, config)
    total = spring_moment(springs, config)
    layers = [
        solve_layer(i, theta_0, config, spring_total=total)
        for i in range(1, config.layout.layer_count + 1)
    ]
    return assemble(theta_0, config, layers, springs)


def moment_deflection_curve(
    config: MechanismConfig,
    theta_max: float,
    n_points: int,
    executor: Executor | None = None,
) -> list[MomentBreakdown]:
    """:func:`assistive_moment` on a uniform grid over ``[0, theta_max]``."""
    if n_points < 2:
        raise DomainError(f"n_points must be >= 2, got {n_points!r}")
    if not 0.0 < theta_max < HALF_PI:
        raise DomainError(f"theta_max must lie in (0, pi/2), got {theta_max!r}")
    grid = [float(t) for t in np.linspace(0.0, theta_max, n_points)]
    if executor is None:
        return [assistive_moment(t, config) for t in grid]
    return list(executor.map(assistive_moment, grid, [config] * len(grid)))


def tangent_stiffness(config: MechanismConfig, theta_0: float, step: float = 1e-4) -> float:
    """Restoring stiffness ``-dM_assist/dtheta`` by central difference (O(step^2))."""
    if not step <= theta_0 < HALF_PI - step:
        raise DomainError(f"theta_0 must be interior (>= {step}), got {theta_0!r}")
    up = assistive_moment(theta_0 + step, config).moment_assist
    down = assistive_moment(theta_0 - step, config).moment_assist
    return -(up - down) / (2.0 * step)


# --- output -----------------------------------------------------------------


def curve_to_csv(curve: Iterable[MomentBreakdown], fh: io.TextIOBase | None = None) -> str:
    """Write the curve as CSV (to ``fh`` if given) and return the text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CURVE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for point in curve:
        writer.writerow({k: repr(v) for k, v in point.row().items()})
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def curve_to_json(curve: Iterable[MomentBreakdown]) -> str:
    return json.dumps([p.row() for p in curve], indent=2)
