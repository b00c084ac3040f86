"""Head-weight compensation, parameter sweeps and spring sizing."""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import GPA, MM, N_PER_MM, ConfigError, DomainError, MechanismConfig, validate_config
from .mechanism import (
    ConstraintInfeasible,
    MomentBreakdown,
    SolidLengthError,
    assistive_moment,
    tangent_stiffness,
)

DEFAULT_ANGLE = math.radians(16.0)
MAX_CELLS = 1_000_000
# axis name -> (CSV column, SI scale of the column unit, config parameter)
SWEEP_AXES = {
    "K": ("K_n_per_mm", N_PER_MM, "K"),
    "preload": ("preload_mm", MM, "preload"),
    "Sep": ("Sep_mm", MM, "Sep"),
    "diameter": ("diameter_mm", MM, "diameter"),
    "E": ("E_gpa", GPA, "E"),
}
SWEEP_VALUE_COLUMNS = ("m_assist_nm", "f_assist_n", "comp_frac", "stiffness_nm_per_rad", "status")


class NonMonotoneResponse(RuntimeError):
    pass


@dataclass(frozen=True)
class HeadModel:
    mass: float = 5.0
    gravity: float = 9.81
    inclination: float = DEFAULT_ANGLE
    lever_arm: float | None = None  # falls back to the mechanism's lever arm

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass!r}")
        if not 0 <= self.inclination < math.pi / 2:
            raise DomainError(f"inclination must lie in [0, pi/2), got {self.inclination!r}")

    @property
    def weight_component(self) -> float:
        """Gravity component the mechanism has to counteract, m g sin(inclination)."""
        return self.mass * self.gravity * math.sin(self.inclination)


def _denominator(head: HeadModel) -> float:
    w = head.weight_component
    if w == 0.0:
        raise DomainError("head inclination is zero; nothing to compensate")
    return w


def _lever(config: MechanismConfig, head: HeadModel) -> float:
    return head.lever_arm if head.lever_arm is not None else config.lever_arm


@dataclass(frozen=True)
class Compensation:
    total: float
    bars: float
    springs: float
    breakdown: MomentBreakdown


def compensation(config: MechanismConfig, head: HeadModel, theta_0: float = DEFAULT_ANGLE) -> Compensation:
    """Assistive force as fractions of the head's gravity component.

    ``total = bars + springs``; the total is the restoring force
    ``-M_assist / L_h`` over ``m g sin(inclination)``.
    """
    w = _denominator(head)
    lever = _lever(config, head)
    b = assistive_moment(theta_0, config)
    bars = b.moment_bars / lever / w
    springs = b.moment_springs / lever / w
    return Compensation(-b.moment_assist / lever / w, bars, springs, b)


def compensation_fraction(config: MechanismConfig, head: HeadModel, theta_0: float = DEFAULT_ANGLE) -> float:
    return compensation(config, head, theta_0).total


def spring_contribution_fraction(
    config: MechanismConfig, head: HeadModel, theta_0: float = DEFAULT_ANGLE
) -> float:
    return compensation(config, head, theta_0).springs


# --- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    params: dict[str, float]
    m_assist: float
    f_assist: float
    comp_frac: float
    spring_frac: float
    stiffness: float
    status: str = "ok"


@dataclass(frozen=True)
class SweepTable:
    axes: dict[str, tuple[float, ...]]
    cells: list[SweepCell] = field(default_factory=list)

    def lookup(self, **params: float) -> SweepCell:
        for c in self.cells:
            if all(c.params[k] == v for k, v in params.items()):
                return c
        raise KeyError(params)

    def to_csv(self, fh: io.TextIOBase | None = None) -> str:
        names = list(self.axes)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([SWEEP_AXES[n][0] for n in names] + list(SWEEP_VALUE_COLUMNS))
        for c in self.cells:
            w.writerow(
                [repr(c.params[n] / SWEEP_AXES[n][1]) for n in names]
                + [repr(c.m_assist), repr(c.f_assist), repr(c.comp_frac), repr(c.stiffness), c.status]
            )
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def evaluate_cell(
    base: MechanismConfig, params: Mapping[str, float], head: HeadModel, theta_0: float
) -> SweepCell:
    nan = math.nan
    try:
        cfg = validate_config(base.with_values(**{SWEEP_AXES[k][2]: v for k, v in params.items()}))
        comp = compensation(cfg, head, theta_0)
        stiff = tangent_stiffness(cfg, theta_0)
    except ConfigError as exc:
        return SweepCell(dict(params), nan, nan, nan, nan, nan, f"infeasible: {exc}")
    except (ConstraintInfeasible, SolidLengthError, DomainError) as exc:
        return SweepCell(dict(params), nan, nan, nan, nan, nan, f"infeasible: {exc}")
    b = comp.breakdown
    return SweepCell(dict(params), b.moment_assist, b.force_assist, comp.total, comp.springs, stiff)


def sweep(
    base: MechanismConfig,
    axes: Mapping[str, Sequence[float]],
    head: HeadModel,
    theta_0: float = DEFAULT_ANGLE,
    executor: Executor | None = None,
    max_cells: int = MAX_CELLS,
) -> SweepTable:
    """Evaluate every combination of the axis values (SI units).

    Infeasible combinations are kept with ``status`` starting ``infeasible``.
    """
    unknown = set(axes) - set(SWEEP_AXES)
    if unknown:
        raise DomainError(f"unknown sweep axes: {sorted(unknown)}")
    if any(len(v) < 1 for v in axes.values()):
        raise DomainError("every axis needs at least one value")
    n_cells = math.prod(len(v) for v in axes.values())
    if n_cells > max_cells:
        raise DomainError(f"sweep has {n_cells} cells, limit is {max_cells}")
    names = list(axes)
    combos = [dict(zip(names, vals)) for vals in itertools.product(*(axes[n] for n in names))]
    if executor is None:
        cells = [evaluate_cell(base, p, head, theta_0) for p in combos]
    else:
        n = len(combos)
        cells = list(executor.map(evaluate_cell, [base] * n, combos, [head] * n, [theta_0] * n))
    return SweepTable({n: tuple(float(v) for v in axes[n]) for n in names}, cells)


# --- spring sizing ----------------------------------------------------------


@dataclass(frozen=True)
class SpringTarget:
    status: str  # "ok" or "infeasible"
    stiffness: float | None  # N/m
    achieved: float
    target: float

    def report(self) -> dict:
        return {
            "status": self.status,
            "stiffness_n_per_mm": None if self.stiffness is None else self.stiffness / N_PER_MM,
            "achieved_fraction": self.achieved,
            "target_fraction": self.target,
        }


def search_spring_for_target(
    base: MechanismConfig,
    head: HeadModel,
    theta_0: float,
    target_fraction: float,
    k_max: float = 20.0 * N_PER_MM,
    rtol: float = 1e-10,
    n_probe: int = 8,
) -> SpringTarget:
    """Smallest spring constant on ``[0, k_max]`` reaching ``target_fraction``.

    The response is probed on a uniform grid first; a decrease anywhere
    raises :class:`NonMonotoneResponse` rather than bisecting a bracket that
    may hold several crossings.
    """
    if not 0.0 < target_fraction <= 2.0:
        raise DomainError(f"target_fraction must lie in (0, 2], got {target_fraction!r}")

    def frac(k: float) -> float:
        return compensation_fraction(base.with_values(K=k), head, theta_0)

    probes = np.linspace(0.0, k_max, n_probe + 1)
    values = [frac(float(k)) for k in probes]
    for (k0, v0), (k1, v1) in zip(zip(probes, values), zip(probes[1:], values[1:])):
        if v1 < v0:
            raise NonMonotoneResponse(
                f"compensation drops from {v0:.6g} at K={k0:.6g} to {v1:.6g} at K={k1:.6g} N/m"
            )
    if values[0] >= target_fraction:
        return SpringTarget("ok", 0.0, values[0], target_fraction)
    if values[-1] < target_fraction:
        return SpringTarget("infeasible", None, values[-1], target_fraction)
    idx = next(i for i, v in enumerate(values) if v >= target_fraction)
    lo, hi = float(probes[idx - 1]), float(probes[idx])
    f_hi = values[idx]
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        f_mid = frac(mid)
        if f_mid >= target_fraction:
            hi, f_hi = mid, f_mid
        else:
            lo = mid
    return SpringTarget("ok", hi, f_hi, target_fraction)
