"""Pure-Python reduction loops over gmpy2 numbers.

These are the reference implementations of the hot loops; the compiled
backend in ``_ckernels`` performs the identical sequence of correctly
rounded operations, so both produce bit-identical results for real input.
Every function works in the caller's current gmpy2 context.
"""

from __future__ import annotations

from gmpy2 import mpfr


def correlate(f, g, gabs, n_out):
    """``D[n] = sum_i f[i] * g[n + i + 1]`` for ``n < n_out``, plus the same
    sum over absolute values (``gabs`` holds ``|g|`` or a bound on it)."""
    fa = [abs(x) for x in f]
    nf = len(f)
    out = []
    out_abs = []
    for n in range(n_out):
        acc = mpfr(0)
        acc_abs = mpfr(0)
        for i in range(nf):
            acc = acc + f[i] * g[n + i + 1]
            acc_abs = acc_abs + fa[i] * gabs[n + i + 1]
        out.append(acc)
        out_abs.append(acc_abs)
    return out, out_abs


def naive_triangle(a, b, strict):
    """``sum_{k1} sum_{k2 < k1} a[k1] * b[k2]`` (``<=`` when not strict).

    Index 0 of both arrays is unused padding so that ``a[k]`` is the k-th
    term.
    """
    acc = mpfr(0)
    n = len(a) - 1
    for k1 in range(1, n + 1):
        ak = a[k1]
        top = k1 if strict else k1 + 1
        for k2 in range(1, top):
            acc = acc + ak * b[k2]
    return acc


def naive_box(factors, total):
    """``sum over m in [1, N_1] x ... x [1, N_r]`` of
    ``prod_i factors[i][m_i] * total[m_1 + ... + m_r]``, visiting lattice
    points in lexicographic order."""
    r = len(factors)
    acc = [mpfr(0)]

    def walk(level, prefix, offset):
        fac = factors[level]
        last = level == r - 1
        for m in range(1, len(fac)):
            p = prefix * fac[m] if level else fac[m]
            if last:
                acc[0] = acc[0] + p * total[offset + m]
            else:
                walk(level + 1, p, offset + m)

    walk(0, None, 0)
    return acc[0]
