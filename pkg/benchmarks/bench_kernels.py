"""Compare the pure-Python and compiled MPFR kernel backends.

    python3 benchmarks/bench_kernels.py [--bits 144] [--repeat 3]

Each kernel runs on identical inputs with both backends; the script checks
the results are bit-identical and prints the best wall time of each.
"""

from __future__ import annotations

import argparse
import random
import sys
import time

import gmpy2
from gmpy2 import mpfr

from qzeta import kernels


def _data(n: int, bits: int, seed: int) -> list:
    rng = random.Random(seed)
    with gmpy2.context(precision=bits):
        return [mpfr(0)] + [mpfr(rng.random()) / (k + 1) for k in range(n)]


def _best(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(bits: int):
    f = _data(400, bits, 1)[1:]
    g = _data(1200, bits, 2)
    ga = [abs(x) for x in g]
    a, b = _data(600, bits, 3), _data(600, bits, 4)
    fac = [_data(40, bits, 5 + i) for i in range(3)]
    tot = _data(130, bits, 9)
    return {
        "correlate 400x600": lambda be: kernels.correlate(f, g, ga, 600, backend=be),
        "triangle 600": lambda be: kernels.naive_triangle(a, b, True, backend=be),
        "box 40^3": lambda be: kernels.naive_box(fac, tot, backend=be),
    }


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--bits", type=int, default=144)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if not kernels.compiled_available():
        print("compiled kernels are not built; only the python backend is available")
        return 1
    print(f"{'kernel':<20} {'python s':>10} {'mpfr-c s':>10} {'speedup':>8}  identical")
    ok = True
    with gmpy2.context(precision=args.bits):
        for name, run in cases(args.bits).items():
            tp, rp = _best(lambda: run("python"), args.repeat)
            tc, rc = _best(lambda: run("mpfr-c"), args.repeat)
            same = rp == rc
            ok &= same
            print(f"{name:<20} {tp:>10.4f} {tc:>10.4f} {tp / tc:>7.1f}x  {same}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
