"""Bending-test ingestion, hysteresis metrics and model fitting.

Input CSV columns: ``time_s,displacement_mm,force_n,preload_mm,cycle_id``.
Everything is converted to SI on read.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import groupby
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .core import GPA, MM, N_PER_MM, DomainError, MechanismConfig
from .mechanism import ConstraintInfeasible, SolidLengthError, assistive_moment

BENDING_COLUMNS = ("time_s", "displacement_mm", "force_n", "preload_mm", "cycle_id")
# 9 mm of stand travel corresponds to roughly 16 degrees of deflection
DEFAULT_CALIBRATION = math.radians(16.0) / (9.0 * MM)  # rad per metre
FIT_PARAMETERS = ("E", "K", "Sep", "ecc")
# unit used for each fit parameter at the I/O boundary
PARAM_UNITS = {"E": ("gpa", GPA), "K": ("n_per_mm", N_PER_MM), "Sep": ("mm", MM), "ecc": ("mm", MM)}
MIN_CYCLE_SAMPLES = 8


class ParseError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class InsufficientData(ValueError):
    pass


class Phase(str, Enum):
    LOADING = "loading"
    UNLOADING = "unloading"


@dataclass(frozen=True)
class TestRecord:
    time: float
    displacement: float
    force: float
    preload: float
    cycle_id: int
    phase: Phase = Phase.LOADING


@dataclass(frozen=True)
class TestCycle:
    cycle_id: int
    records: tuple[TestRecord, ...]
    preload: float
    loop_area: float | None = None
    region_breakpoints: tuple[float, float] | None = None

    def loading(self) -> list[TestRecord]:
        return [r for r in self.records if r.phase is Phase.LOADING]


@dataclass(frozen=True)
class FitResult:
    fitted_params: dict[str, float]
    rms_residual: float
    iterations: int
    n_samples: int
    bounds_hit: tuple[str, ...] = ()
    objective_initial: float = math.nan
    objective_final: float = math.nan
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def at_bound(self) -> bool:
        return bool(self.bounds_hit)

    def report(self) -> dict:
        fitted = {}
        for name, value in self.fitted_params.items():
            suffix, scale = PARAM_UNITS[name]
            fitted[f"{name}_{suffix}"] = value / scale
        return {
            "fitted": fitted,
            "rms_residual_nm": self.rms_residual,
            "n_samples": self.n_samples,
            "bounds_hit": list(self.bounds_hit),
            "iterations": self.iterations,
        }


# --- parsing ----------------------------------------------------------------


def label_phases(displacement: Sequence[float]) -> list[Phase]:
    """Loading/unloading from the sign of change of the 3-sample smoothed displacement."""
    d = np.asarray(displacement, dtype=float)
    n = len(d)
    if n == 0:
        return []
    if n < 3:
        sm = d
    else:
        sm = np.convolve(d, np.ones(3) / 3.0, mode="same")
        sm[0] = d[:2].mean()
        sm[-1] = d[-2:].mean()
    # differences at rounding level (e.g. a symmetric peak) count as flat
    tol = 1e-9 * max(float(np.ptp(d)), float(np.abs(d).max()) * 1e-6, 1e-300)
    out: list[Phase | None] = []
    for j in range(n):
        delta = sm[min(j + 1, n - 1)] - sm[max(j - 1, 0)]
        if delta > tol:
            out.append(Phase.LOADING)
        elif delta < -tol:
            out.append(Phase.UNLOADING)
        else:
            out.append(None)
    # flat stretches inherit the previous direction, leading ones the next
    last = next((p for p in out if p is not None), Phase.LOADING)
    for j, p in enumerate(out):
        if p is None:
            out[j] = last
        else:
            last = p
    return out  # type: ignore[return-value]


def _open_text(source) -> tuple[io.TextIOBase, bool]:
    if hasattr(source, "read"):
        return source, False
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        return open(source, newline=""), True
    raise ParseError(f"cannot open {source!r}")


def load_bending_csv(source) -> list[TestRecord]:
    """Parse a bending-test CSV (path or open text stream) into SI records."""
    fh, owned = _open_text(source)
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("no records")
        missing = [c for c in BENDING_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"missing column(s): {', '.join(missing)}", row=1)
        raw = []
        for lineno, row in enumerate(reader, start=2):
            try:
                t = float(row["time_s"])
                disp = float(row["displacement_mm"]) * MM
                force = float(row["force_n"])
                pre = float(row["preload_mm"]) * MM
                cid = int(float(row["cycle_id"]))
            except (TypeError, ValueError):
                raise ParseError("non-numeric or missing cell", row=lineno) from None
            if not all(math.isfinite(v) for v in (t, disp, force, pre)):
                raise ParseError("non-finite value", row=lineno)
            if force < 0 or disp < 0:
                raise ParseError("force and displacement must be non-negative", row=lineno)
            raw.append((lineno, t, disp, force, pre, cid))
    finally:
        if owned:
            fh.close()
    if not raw:
        raise ParseError("no records")

    records: list[TestRecord] = []
    by_cycle: dict[int, list] = {}
    for item in raw:
        by_cycle.setdefault(item[5], []).append(item)
    for cid, rows in by_cycle.items():
        for prev, cur in zip(rows, rows[1:]):
            if not cur[1] > prev[1]:
                raise ParseError(f"time not strictly increasing in cycle {cid}", row=cur[0])
        phases = label_phases([r[2] for r in rows])
        records.extend(
            TestRecord(t, disp, force, pre, c, ph)
            for (_, t, disp, force, pre, c), ph in zip(rows, phases)
        )
    records.sort(key=lambda r: (r.cycle_id, r.time))
    return records


def records_to_csv(records: Iterable[TestRecord], fh: io.TextIOBase | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENDING_COLUMNS)
    for r in records:
        w.writerow([repr(r.time), repr(r.displacement / MM), repr(r.force), repr(r.preload / MM), r.cycle_id])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def group_cycles(records: Iterable[TestRecord]) -> list[TestCycle]:
    ordered = sorted(records, key=lambda r: (r.cycle_id, r.time))
    return [
        TestCycle(cid, tuple(rs), rs[0].preload)
        for cid, grp in groupby(ordered, key=lambda r: r.cycle_id)
        for rs in [list(grp)]
    ]


def load_curve_csv(source) -> list[dict[str, float]]:
    """Read a model curve written by :func:`flexmech.mechanism.curve_to_csv`."""
    from .mechanism import CURVE_COLUMNS

    fh, owned = _open_text(source)
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in CURVE_COLUMNS):
            raise ParseError("not a curve CSV", row=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append({c: float(row[c]) for c in CURVE_COLUMNS})
            except (TypeError, ValueError):
                raise ParseError("non-numeric cell", row=lineno) from None
    finally:
        if owned:
            fh.close()
    if not rows:
        raise ParseError("no records")
    return rows


# --- conversions ------------------------------------------------------------


def displacement_to_angle(displacement, calibration: float = DEFAULT_CALIBRATION):
    """Stand travel [m] to bending angle [rad] with a linear coefficient [rad/m]."""
    d = np.asarray(displacement, dtype=float)
    if np.any(d < 0):
        raise DomainError("displacement must be non-negative")
    out = d * calibration
    return float(out) if out.ndim == 0 else out


def experimental_moment(force, lever: float):
    """Restoring moment from the gauge force and its lever arm."""
    if not lever > 0:
        raise DomainError(f"lever must be positive, got {lever!r}")
    out = np.asarray(force, dtype=float) * lever
    return float(out) if out.ndim == 0 else out


def cycle_curve(
    cycle: TestCycle, lever: float, calibration: float = DEFAULT_CALIBRATION
) -> tuple[np.ndarray, np.ndarray, list[Phase]]:
    theta = displacement_to_angle([r.displacement for r in cycle.records], calibration)
    moment = experimental_moment([r.force for r in cycle.records], lever)
    return np.atleast_1d(theta), np.atleast_1d(moment), [r.phase for r in cycle.records]


# --- hysteresis -------------------------------------------------------------


def loop_area(theta: Sequence[float], moment: Sequence[float]) -> float:
    """Area enclosed by the (theta, M) loop, closing it back to the first point.

    Loading above unloading (clockwise) gives a positive signed integral; the
    magnitude is returned either way.
    """
    th = np.append(np.asarray(theta, float), theta[0])
    m = np.append(np.asarray(moment, float), moment[0])
    signed = float(np.sum(0.5 * (m[1:] + m[:-1]) * np.diff(th)))
    return abs(signed)


@dataclass(frozen=True)
class PiecewiseFit:
    knots: tuple[float, float]
    slopes: tuple[float, float, float]
    intercept: float
    sse: float


def two_knot_fit(theta: Sequence[float], moment: Sequence[float], n_candidates: int = 50) -> PiecewiseFit:
    """Continuous three-segment linear least-squares fit with knots on a grid."""
    th = np.asarray(theta, float)
    m = np.asarray(moment, float)
    if len(th) < MIN_CYCLE_SAMPLES:
        raise InsufficientData(f"need at least {MIN_CYCLE_SAMPLES} samples, got {len(th)}")
    cand = np.linspace(th.min(), th.max(), n_candidates + 2)[1:-1]
    best: PiecewiseFit | None = None
    base = np.column_stack([np.ones_like(th), th])
    hinge = np.maximum(th[:, None] - cand[None, :], 0.0)
    for i in range(len(cand)):
        for j in range(i + 1, len(cand)):
            a = np.column_stack([base, hinge[:, i], hinge[:, j]])
            coef, *_ = np.linalg.lstsq(a, m, rcond=None)
            sse = float(np.sum((a @ coef - m) ** 2))
            if best is None or sse < best.sse:
                s1 = coef[1]
                best = PiecewiseFit(
                    (float(cand[i]), float(cand[j])),
                    (float(s1), float(s1 + coef[2]), float(s1 + coef[2] + coef[3])),
                    float(coef[0]),
                    sse,
                )
    assert best is not None
    return best


@dataclass(frozen=True)
class HysteresisMetrics:
    loop_area: float
    region_breakpoints: tuple[float, float]
    slopes: tuple[float, float, float]
    unloading_breakpoints: tuple[float, float] | None = None


def hysteresis_metrics(
    cycle: TestCycle, lever: float, calibration: float = DEFAULT_CALIBRATION
) -> HysteresisMetrics:
    if len(cycle.records) < MIN_CYCLE_SAMPLES:
        raise InsufficientData(
            f"cycle {cycle.cycle_id} has {len(cycle.records)} samples, need {MIN_CYCLE_SAMPLES}"
        )
    theta, moment, phases = cycle_curve(cycle, lever, calibration)
    load = np.array([p is Phase.LOADING for p in phases])
    if load.all() or not load.any():
        raise InsufficientData(f"cycle {cycle.cycle_id} lacks a loading or unloading phase")
    area = loop_area(theta, moment)
    fit = two_knot_fit(theta[load], moment[load])
    unload = None
    if (~load).sum() >= MIN_CYCLE_SAMPLES:
        unload = two_knot_fit(theta[~load], moment[~load]).knots
    return HysteresisMetrics(area, fit.knots, fit.slopes, unload)


METRICS_COLUMNS = (
    "cycle_id", "preload_mm", "loop_area_j", "knee1_rad", "knee2_rad", "slope1", "slope2", "slope3",
)


def metrics_rows(cycles: Sequence[TestCycle], lever: float, calibration: float = DEFAULT_CALIBRATION):
    for c in cycles:
        h = hysteresis_metrics(c, lever, calibration)
        yield {
            "cycle_id": c.cycle_id,
            "preload_mm": c.preload / MM,
            "loop_area_j": h.loop_area,
            "knee1_rad": h.region_breakpoints[0],
            "knee2_rad": h.region_breakpoints[1],
            "slope1": h.slopes[0],
            "slope2": h.slopes[1],
            "slope3": h.slopes[2],
        }


# --- synthetic data ---------------------------------------------------------


def model_restoring_moment(theta: float, config: MechanismConfig) -> float:
    return -assistive_moment(theta, config).moment_assist


def synthetic_records(
    config: MechanismConfig,
    lever: float,
    *,
    n_cycles: int = 3,
    peak_displacement: float = 9.0 * MM,
    samples_per_ramp: int = 19,
    noise: float = 0.0,
    seed: int = 0,
    calibration: float = DEFAULT_CALIBRATION,
    dt: float = 0.1,
) -> list[TestRecord]:
    """Triangle-wave bending test generated from the forward model.

    ``noise`` is the standard deviation of multiplicative Gaussian noise on
    the force reading.
    """
    rng = np.random.default_rng(seed)
    up = np.linspace(0.0, peak_displacement, samples_per_ramp)
    wave = np.concatenate([up, up[-2::-1]])
    cache: dict[float, float] = {}
    out: list[TestRecord] = []
    t = 0.0
    for cid in range(1, n_cycles + 1):
        phases = label_phases(wave)
        for disp, ph in zip(wave, phases):
            key = float(disp)
            if key not in cache:
                cache[key] = model_restoring_moment(key * calibration, config) / lever
            force = cache[key]
            if noise:
                force *= 1.0 + noise * rng.standard_normal()
            out.append(TestRecord(round(t, 9), key, max(force, 0.0), config.preload, cid, ph))
            t += dt
    return out


# --- fitting ----------------------------------------------------------------


def _loading_samples(cycles: Sequence[TestCycle], lever: float, calibration: float):
    thetas, moments = [], []
    for c in cycles:
        th, m, ph = cycle_curve(c, lever, calibration)
        for a, b, p in zip(th, m, ph):
            if p is Phase.LOADING:
                thetas.append(float(a))
                moments.append(float(b))
    return np.array(thetas), np.array(moments)


def fit_parameters(
    cycles: Sequence[TestCycle],
    free: Iterable[str],
    bounds: Mapping[str, tuple[float, float]],
    config: MechanismConfig,
    lever: float,
    *,
    calibration: float = DEFAULT_CALIBRATION,
    maxiter: int = 2000,
    loading_only: bool = True,
    seed: int = 0,
    n_starts: int = 32,
) -> FitResult:
    """Least-squares fit of model parameters to measured moments.

    Works on the unit box mapped onto ``bounds`` (SI units). The initial
    point and ``n_starts`` seeded scrambled-Sobol points are screened, then a bounded
    Nelder-Mead search runs from the best of them. The model has a cusp where a
    layer's moment part changes sign, so a single local start can stall.
    Only loading-phase samples are used unless ``loading_only`` is False.
    ``maxiter`` caps objective evaluations.
    """
    names = [n for n in FIT_PARAMETERS if n in set(free)]
    unknown = set(free) - set(FIT_PARAMETERS)
    if unknown:
        raise DomainError(f"unknown fit parameter(s): {sorted(unknown)}")
    if not names:
        raise DomainError("free parameter set is empty")
    for n in names:
        lo, hi = bounds[n]
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"bounds for {n} must be finite with lo < hi")
    if loading_only:
        theta, target = _loading_samples(cycles, lever, calibration)
    else:
        parts = [cycle_curve(c, lever, calibration) for c in cycles]
        theta = np.concatenate([p[0] for p in parts])
        target = np.concatenate([p[1] for p in parts])
    if theta.size == 0:
        raise DomainError("no loading-phase samples to fit")
    uniq, inverse = np.unique(theta, return_inverse=True)

    lows = np.array([bounds[n][0] for n in names])
    spans = np.array([bounds[n][1] for n in names]) - lows

    def params(u: np.ndarray) -> dict[str, float]:
        return {n: float(v) for n, v in zip(names, lows + spans * np.clip(u, 0.0, 1.0))}

    def sse(u: np.ndarray) -> float:
        cfg = config.with_values(**params(u))
        try:
            model = np.array([model_restoring_moment(float(t), cfg) for t in uniq])
        except (ConstraintInfeasible, SolidLengthError, DomainError):
            return math.inf
        return float(np.sum((model[inverse] - target) ** 2))

    current = {"E": config.bar.elastic_modulus, "K": config.spring.stiffness,
               "Sep": config.layout.layer_separation, "ecc": config.eccentricity}
    u0 = np.array([
        (current[n] - lo) / sp if lo <= current[n] <= lo + sp else 0.5
        for n, lo, sp in zip(names, lows, spans)
    ])
    f0 = sse(u0)
    if not math.isfinite(f0):
        raise DomainError("objective is not finite at the initial point")

    best = {"u": u0.copy(), "f": f0}
    history = [f0]

    def tracked(u: np.ndarray) -> float:
        f = sse(u)
        if len(history) < maxiter and f < best["f"]:
            best["u"], best["f"] = np.array(u, float), f
        history.append(best["f"])
        return f if math.isfinite(f) else 1e300

    if n_starts > 0:
        for u in qmc.Sobol(len(names), scramble=True, seed=seed).random(n_starts):
            tracked(u)
    budget = max(maxiter - len(history), 1)
    start = best["u"].copy()
    # simplex edge ~ screening spacing, pointing inwards from the box faces
    edge = 1.0 / max(n_starts, 8)
    simplex = [start]
    for k in range(len(names)):
        v = start.copy()
        v[k] += edge if v[k] + edge <= 1.0 else -edge
        simplex.append(v)
    minimize(
        tracked,
        start,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * len(names),
        options={"maxfev": budget, "xatol": 1e-10, "fatol": 0.0, "initial_simplex": np.array(simplex)},
    )
    fitted = params(best["u"])
    hit = tuple(
        n for n, lo, sp in zip(names, lows, spans)
        if min(fitted[n] - lo, lo + sp - fitted[n]) <= 1e-6 * sp
    )
    return FitResult(
        fitted_params=fitted,
        rms_residual=math.sqrt(best["f"] / theta.size),
        iterations=len(history) - 1,
        n_samples=int(theta.size),
        bounds_hit=hit,
        objective_initial=f0,
        objective_final=best["f"],
        history=tuple(history),
    )


def with_metrics(cycle: TestCycle, lever: float, calibration: float = DEFAULT_CALIBRATION) -> TestCycle:
    h = hysteresis_metrics(cycle, lever, calibration)
    return replace(cycle, loop_area=h.loop_area, region_breakpoints=h.region_breakpoints)
