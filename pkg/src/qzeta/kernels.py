"""Backend selection for the hot reduction loops.

The compiled MPFR backend is used when it was built and the inputs are
real; complex inputs and ``QZETA_PURE_PYTHON=1`` route to the pure-Python
loops.  Both backends perform the same correctly rounded operations in the
same order, so the choice never changes a result.
"""

from __future__ import annotations

import os

import gmpy2
from gmpy2 import mpc, mpfr

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_FORCE_PYTHON = os.environ.get("QZETA_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}


def compiled_available() -> bool:
    return _ckernels is not None


def backend_name() -> str:
    return "python" if _FORCE_PYTHON or _ckernels is None else "mpfr-c"


def _use_c(backend: str | None, *arrays) -> bool:
    if backend == "python":
        return False
    if backend == "mpfr-c":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
    elif _FORCE_PYTHON or _ckernels is None:
        return False
    for arr in arrays:
        if any(isinstance(x, mpc) for x in arr):
            if backend == "mpfr-c":
                raise TypeError("compiled kernels accept real input only")
            return False
    return True


def _pack(values) -> list:
    out = []
    for x in values:
        x = mpfr(x) if not isinstance(x, mpfr) else x
        if x == 0:
            out.append((0, 0))
        else:
            m, e = x.as_mantissa_exp()
            out.append((int(m), int(e)))
    return out


def _unpack(pair, prec: int) -> mpfr:
    m, e = pair
    with gmpy2.context(precision=prec):
        return gmpy2.mul_2exp(mpfr(m), e)


def correlate(f, g, gabs, n_out: int, backend: str | None = None):
    """``D[n] = sum_i f[i] g[n+i+1]`` and its absolute-value companion."""
    if _use_c(backend, f, g):
        prec = gmpy2.get_context().precision
        d, da = _ckernels.correlate(_pack(f), _pack(g), _pack(gabs), n_out, prec)
        return [_unpack(p, prec) for p in d], [_unpack(p, prec) for p in da]
    return _pykernels.correlate(f, g, gabs, n_out)


def naive_triangle(a, b, strict: bool, backend: str | None = None):
    """Triangular double sum ``sum_{k2 < k1} a[k1] b[k2]`` (``<=`` if not strict)."""
    if _use_c(backend, a, b):
        prec = gmpy2.get_context().precision
        return _unpack(_ckernels.naive_triangle(_pack(a), _pack(b), strict, prec), prec)
    return _pykernels.naive_triangle(a, b, strict)


def naive_box(factors, total, backend: str | None = None):
    """Box sum ``sum_m prod_i factors[i][m_i] * total[sum m_i]``."""
    if _use_c(backend, total, *factors):
        prec = gmpy2.get_context().precision
        packed = [_pack(f) for f in factors]
        return _unpack(_ckernels.naive_box(packed, _pack(total), prec), prec)
    return _pykernels.naive_box(factors, total)
