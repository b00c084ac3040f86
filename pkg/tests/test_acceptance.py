"""Acceptance criteria, one test each, each printing a single PASS/FAIL line.

Run ``python3 tests/test_acceptance.py`` for the summary lines alone, or
``pytest tests/test_acceptance.py -v`` for the full report.
"""
from __future__ import annotations

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexmech import _pykernels
from flexmech.calib import fit_parameters, group_cycles, loop_area, synthetic_records
from flexmech.cli import main as cli_main
from flexmech.core import GPA, MM, SpringMode, prototype_default_config
from flexmech.elastica import gamma_integral, tip_force_from_angle
from flexmech.mechanism import assistive_moment, moment_deflection_curve
from flexmech.oracle import oracle_assistive_moment, relative_deviation

ROOT = Path(__file__).resolve().parents[1]
CFG = prototype_default_config()
L = CFG.bar.bendable_length
EI = CFG.rigidity
PRELOADS_MM = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5)
ORACLE_GRID = np.radians(np.linspace(2.0, 16.0, 10))

# Max closed-form/oracle relative deviation on the prototype-default config over
# ORACLE_GRID, frozen from the first oracle run (400 RK4 steps per bar).
FROZEN_ORACLE_DEVIATION = 4.8648459106533795e-3
ORACLE_ALLOWANCE = 0.005  # half a percentage point


def report(capsys, number: int, ok: bool, text: str) -> None:
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {text}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)


def _linear_error(theta: float) -> float:
    f = tip_force_from_angle(theta, L, EI)
    return abs(f * L**2 / (2 * EI) - theta) / theta


# --- 1 ------------------------------------------------------------------------

_worst = {"small": 0.0, "large": 0.0}


@settings(max_examples=150, deadline=None, derandomize=True)
@given(st.floats(1e-4, math.radians(20.0)))
def _elastica_property(theta):
    err = _linear_error(theta)
    key = "small" if theta <= math.radians(5.0) else "large"
    _worst[key] = max(_worst[key], err)
    assert err <= (0.01 if key == "small" else 0.10)


def test_01_elastica_vs_linear_theory(capsys):
    t0 = time.perf_counter()
    ok = True
    try:
        _elastica_property()
    except AssertionError:
        ok = False
    # include the interval ends explicitly
    small = max(_worst["small"], _linear_error(math.radians(5.0)))
    large = max(_worst["large"], _linear_error(math.radians(20.0)))
    dt = time.perf_counter() - t0
    ok = ok and small <= 0.01 and large <= 0.10 and dt < 1.0
    report(capsys, 1, ok, f"elastica vs linear theory: max err {small:.3%} (<=5 deg, tol 1%), "
           f"{large:.3%} (<=20 deg, tol 10%), {dt:.2f} s (< 1 s)")
    assert ok


# --- 2, 3 ---------------------------------------------------------------------


def _max_oracle_deviation(cfg) -> float:
    return max(
        relative_deviation(assistive_moment(t, cfg).moment_assist, oracle_assistive_moment(t, cfg).moment_assist)
        for t in ORACLE_GRID
    )


def test_02_oracle_pure_force(capsys):
    t0 = time.perf_counter()
    dev = _max_oracle_deviation(CFG.with_values(K=0.0, ecc=0.0))
    dt = time.perf_counter() - t0
    ok = dev <= 0.01 and dt < 10.0
    report(capsys, 2, ok, f"oracle, K=0 ecc=0: max rel dev {dev:.3e} (tol 1e-2), {dt:.2f} s (< 10 s)")
    assert ok


def test_03_oracle_regression(capsys):
    dev = _max_oracle_deviation(CFG)
    limit = FROZEN_ORACLE_DEVIATION + ORACLE_ALLOWANCE
    ok = dev <= limit
    report(capsys, 3, ok, f"oracle regression, prototype default: max rel dev {dev:.6e} "
           f"(frozen {FROZEN_ORACLE_DEVIATION:.6e}, limit {limit:.6e})")
    assert ok


# --- 4 ------------------------------------------------------------------------


def _r_squared(x: np.ndarray, y: np.ndarray) -> float:
    a = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    r = y - a @ coef
    return 1.0 - float(r @ r) / float(((y - y.mean()) ** 2).sum())


def test_04_model_linearity(capsys):
    # 1 deg grid over [0, 16] deg, the CLI curve default
    t0 = time.perf_counter()
    r2, r2_engaged = [], []
    for p in PRELOADS_MM:
        curve = moment_deflection_curve(CFG.with_values(preload=p * MM), math.radians(16.0), 17)
        th = np.array([b.theta_0 for b in curve])
        m = np.array([b.moment_assist for b in curve])
        r2.append(_r_squared(th, m))
        r2_engaged.append(_r_squared(th[1:], m[1:]))
    dt = time.perf_counter() - t0
    ok = min(r2) >= 0.99 and dt < 5.0
    listing = ", ".join(f"{p:g}mm:{v:.4f}" for p, v in zip(PRELOADS_MM, r2))
    report(capsys, 4, ok, f"linearity R^2 over [0,16] deg (tol 0.99): {listing}; "
           f"excluding theta=0: min {min(r2_engaged):.5f}; {dt:.2f} s (< 5 s)")
    assert ok


# --- 5, 6 ---------------------------------------------------------------------


def test_05_preload_monotone(capsys):
    th = math.radians(16.0)
    mags = [abs(assistive_moment(th, CFG.with_values(preload=p * MM)).moment_assist) for p in PRELOADS_MM]
    ok = all(b > a for a, b in zip(mags, mags[1:]))
    report(capsys, 5, ok, "|M_assist| at 16 deg over preloads 0..12.5 mm: "
           + ", ".join(f"{m:.4f}" for m in mags) + " N m (strictly increasing)")
    assert ok


def test_06_spring_linearity(capsys):
    cfg = replace(CFG, spring_mode=SpringMode.THRESHOLD)
    th = math.radians(16.0)
    a = assistive_moment(th, cfg).moment_springs
    b = assistive_moment(th, cfg.with_values(K=4 * cfg.spring.stiffness)).moment_springs
    rel = abs(b - 4 * a) / abs(4 * a)
    ok = rel <= 1e-9
    report(capsys, 6, ok, f"4K -> 4x spring moment (threshold, p=0): rel err {rel:.2e} (tol 1e-9)")
    assert ok


# --- 7, 8 ---------------------------------------------------------------------


def test_07_gamma_quadrature(capsys):
    small = gamma_integral(0.01, 0.01)
    e_small = abs(small - 2 * math.sqrt(0.01)) / (2 * math.sqrt(0.01))
    value, panels = _pykernels.gamma_quad(0.3, 0.3)
    # reference with each panel split in two
    ref = _pykernels._composite(*_pykernels._gamma_limits(0.3, 0.3), 2 * panels)
    e_ref = abs(gamma_integral(0.3, 0.3) - ref) / ref
    ok = e_small <= 5e-3 and e_ref <= 1e-8
    report(capsys, 7, ok, f"Gamma: 2 sqrt(theta) err {e_small:.2e} at 0.01 rad (tol 5e-3); "
           f"step-halved err {e_ref:.2e} at 0.3 rad (tol 1e-8)")
    assert ok


def test_08_closure(capsys):
    worst = 0.0
    count = 0
    for p in PRELOADS_MM:
        for b in moment_deflection_curve(CFG.with_values(preload=p * MM), math.radians(20.0), 41):
            worst = max(worst, abs(b.closure_residual) / max(abs(b.moment_bars), 1e-12))
            count += 1
    ok = worst <= 1e-9
    report(capsys, 8, ok, f"moment closure over {count} breakdowns: worst {worst:.2e} (tol 1e-9)")
    assert ok


# --- 9 ------------------------------------------------------------------------


def test_09_calibration_roundtrip(capsys):
    lever = 0.12
    bounds = {"E": (60 * GPA, 100 * GPA)}
    clean = fit_parameters(group_cycles(synthetic_records(CFG, lever)), ["E"], bounds, CFG, lever)
    noisy = fit_parameters(
        group_cycles(synthetic_records(CFG, lever, noise=0.02, seed=1)), ["E"], bounds, CFG, lever
    )
    e_clean = abs(clean.fitted_params["E"] / (80 * GPA) - 1)
    e_noisy = abs(noisy.fitted_params["E"] / (80 * GPA) - 1)
    # parallelogram: width 0.1 N m over 0.2 rad
    area = loop_area([0.0, 0.2, 0.2, 0.0], [0.1, 0.5, 0.4, 0.0])
    e_area = abs(area - 0.02) / 0.02
    ok = e_clean <= 0.02 and e_noisy <= 0.05 and e_area <= 0.01
    report(capsys, 9, ok, f"calibration: E err {e_clean:.2e} clean (tol 2%), {e_noisy:.2e} "
           f"with 2% noise (tol 5%); loop area err {e_area:.1e} (tol 1%)")
    assert ok


# --- 10 -----------------------------------------------------------------------


def test_10_non_reproducibility_note(capsys):
    text = (ROOT / "README.md").read_text()
    ok = "## What is not reproduced" in text
    report(capsys, 10, ok, "non-reproducible experimental values documented in README "
           "('What is not reproduced'); covered by property suites 1-9 only")
    assert ok


# --- 11 -----------------------------------------------------------------------


def test_11_end_to_end(tmp_path, capsys):
    import tempfile

    base = Path(tmp_path) if tmp_path is not None else Path(tempfile.mkdtemp())
    t0 = time.perf_counter()
    codes = [
        cli_main(["curve", "--preload-mm", *map(str, PRELOADS_MM), "--out", str(base / "curves.csv")]),
        cli_main(["oracle-check", "--out", str(base / "oracle.csv")]),
        cli_main(["synth", "--lever-mm", "120", "--out", str(base / "bend.csv")]),
        cli_main(["fit", str(base / "bend.csv"), "--bounds", "E=60:100", "--lever-mm", "120",
                  "--out", str(base / "fit.json")]),
    ]
    dt = time.perf_counter() - t0
    ok = codes == [0, 0, 0, 0] and dt < 60.0
    report(capsys, 11, ok, f"end-to-end curve x6 + oracle-check + synth + fit: exit codes {codes}, "
           f"{dt:.1f} s (< 60 s)")
    assert ok


if __name__ == "__main__":
    import inspect

    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            kwargs = {p: None for p in inspect.signature(fn).parameters}
            try:
                fn(**kwargs)
            except AssertionError:
                pass
