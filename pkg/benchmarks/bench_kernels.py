"""Compiled vs pure-Python kernel timings.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import math
import timeit

from flexmech import _pykernels

try:
    from flexmech import _ckernels
except ImportError:  # extension not built
    _ckernels = None

EI = 80e9 * math.pi * 0.0015**4 / 64
L = 0.08

CASES = {
    "gamma_quad(0.2, 0.28)": lambda k: k.gamma_quad(0.2, 0.28),
    "gamma_quad(1.5, 1.5)": lambda k: k.gamma_quad(1.5, 1.5),
    "rk4_final(n=400)": lambda k: k.rk4_final(4.0, 0.3, L, EI, 400),
    "shoot(n=400)": lambda k: k.shoot(4.0, 0.0, L, EI, 400),
}


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<24}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}")
    for name, call in CASES.items():
        tp = best_time(lambda: call(_pykernels), args.repeat) * 1e6
        if _ckernels is None:
            print(f"{name:<24}{tp:>14.1f}{'n/a':>14}{'':>10}")
            continue
        tc = best_time(lambda: call(_ckernels), args.repeat) * 1e6
        print(f"{name:<24}{tp:>14.1f}{tc:>14.1f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
