"""Binomial-expansion evaluators, pole classification and the (0,0) limits.

Expanding ``(q^k - 1)^{-s} = q^{-ks} sum_j C(s, j) q^{-kj}`` and summing
the resulting geometric series in each index turns the double series into

    (q-1)^{s1+s2} sum_{k1,k2 >= 0} C(s1,k1) C(s2,k2)
        / ((q^{s1+k1-1} - 1) (q^{x0+k1+k2} - 1)),

with ``x0 = s1+s2-2`` for the double zeta function and ``x0 = s1+s2-1`` for
the circ variant.  The expression is meaningful wherever no retained
denominator vanishes, which continues both functions past the region of
absolute convergence.  For ``k1 >= 1`` the factor ``C(s1,k1)/(q^x - 1)``
with ``x = s1+k1-1`` is evaluated as ``C(s1,k1-1)/k1 * x/(q^x - 1)``, so
the removable singularities at ``s1 = 1 - k1`` never reach a division.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr

from . import kernels
from .qnum import (
    CVal,
    DomainError,
    PrecisionCtx,
    QBase,
    Status,
    ValueWithError,
    denominator_rel_error,
    exact_pole_index,
    imag_part,
    is_real,
    qpow_minus_one,
    real_part,
    rising_coeffs,
    simplify,
    to_number,
)

MAX_EXPANSION_INDEX = 20_000
_MARGIN = 1 + gmpy2.mul_2exp(mpfr(1), -20)


class LimitOrder(str, enum.Enum):
    """Which variable reaches its integer value first in an iterated limit."""

    S2_FIRST = "s2_first"
    S1_FIRST = "s1_first"


@dataclass(frozen=True)
class PoleClassification:
    is_pole: bool
    offending_exponent: CVal | None
    family: str


# -- building blocks -------------------------------------------------------


def _phi(base: QBase, x: CVal) -> CVal:
    """``x / (q^x - 1)``, equal to ``1/log q`` at ``x = 0``."""
    if x == 0:
        return 1 / base.log_q
    return x / qpow_minus_one(base, x)


def _pole_status(base: QBase, ctx: PrecisionCtx, exponents) -> Status:
    """Raise on an exact pole, flag proximity, else converged."""
    status = Status.CONVERGED
    threshold = ctx.pole_threshold
    for x in exponents:
        if exact_pole_index(x, base, ctx) is not None:
            raise DomainError(f"q^x = 1 at retained exponent x = {x}")
        if abs(qpow_minus_one(base, x)) < threshold:
            status = Status.POLE_PROXIMATE
    return status


def _rising_abs(a: mpfr, k_max: int) -> list:
    """``C(a, k)`` for ``a = |s| >= 0``, the majorant of ``|C(s, k)|``."""
    out = [mpfr(1)]
    c = mpfr(1)
    for k in range(1, k_max + 1):
        c = c * (a + k - 1) / k
        out.append(c)
    return out


def _coeff_rel_error(k_max: int, complex_arg: bool, u: mpfr) -> mpfr:
    # two roundings per recurrence step, four for complex arithmetic
    return u * (6 if complex_arg else 3) * (k_max + 1)


def _prefactor(base: QBase, s: CVal) -> tuple[CVal, mpfr]:
    """``(q-1)^s`` and its relative error in units of the working roundoff."""
    log_qm1 = gmpy2.log(base.q_minus_one)
    value = gmpy2.exp(s * log_qm1)
    return simplify(value), 4 + 4 * abs(s) * (abs(log_qm1) + 1)


def _inv_list(base: QBase, x0: CVal, n_max: int, u: mpfr):
    """``1/(q^{x0+n} - 1)`` for ``n <= n_max`` and the worst relative error."""
    out = []
    worst = mpfr(0)
    for n in range(n_max + 1):
        x = x0 + n
        d = qpow_minus_one(base, x)
        out.append(simplify(1 / d))
        worst = max(worst, denominator_rel_error(base, x, d, u))
    return out, worst


def _outer_factors(base: QBase, s1: CVal, k_max: int, u: mpfr):
    """``C(s1,k)/(q^{s1+k-1} - 1)`` for ``k <= k_max`` with removable points
    handled through ``x/(q^x - 1)``; returns values and worst relative error."""
    coeffs = rising_coeffs(s1, k_max)
    out = []
    worst = mpfr(0)
    for k in range(k_max + 1):
        x = s1 + (k - 1)
        if k == 0:
            d = qpow_minus_one(base, x)
            out.append(simplify(1 / d))
            worst = max(worst, denominator_rel_error(base, x, d, u))
            continue
        out.append(simplify(coeffs[k - 1] / k * _phi(base, x)))
        if x != 0:
            d = qpow_minus_one(base, x)
            worst = max(worst, denominator_rel_error(base, x, d, u) + 4 * u)
    return out, worst


def _envelope_ok(abs_s: mpfr, k: int, q: mpfr) -> bool:
    return (abs_s + k + 1) / (k + 2) < q


# -- two-index expansion ---------------------------------------------------


def _double_expansion(base: QBase, ctx: PrecisionCtx, s1: CVal, s2: CVal, shift: int) -> ValueWithError:
    """Shared engine: ``x0 = s1 + s2 - shift`` in the second denominator."""
    u = ctx.unit_roundoff
    x1 = s1 - 1
    x0 = s1 + s2 - shift
    a1 = real_part(x1)
    a0 = real_part(x0)
    q = base.q

    # x1 + k for k >= 1 is removable only where it is exactly zero
    k_crit = max(0, int(gmpy2.ceil(-a1)) + 1) if a1 <= 0 else 0
    status = _pole_status(base, ctx, [x1] + [x1 + k for k in range(1, k_crit + 1) if x1 + k != 0])
    # the second denominator can vanish only while Re(x0 + n) <= 0
    n_crit = max(0, int(gmpy2.ceil(-a0)) + 1) if a0 <= 0 else 0
    status_2 = _pole_status(base, ctx, [x0 + n for n in range(n_crit + 1)])
    if status_2 is not Status.CONVERGED:
        status = status_2

    S1, S2 = abs(s1), abs(s2)
    target = ctx.abs_tol / 2

    # smallest K where every envelope is geometric
    k_start = max(2, n_crit + 2, int(gmpy2.ceil(-a1)) + 2)
    while not (_envelope_ok(S1, k_start, q) and _envelope_ok(S2, k_start, q)):
        k_start += 1

    with gmpy2.context(precision=64):
        def A(k):
            return C1[k] / (q ** (a1 + k) - 1)

        def D(n):
            return 1 / (q ** (a0 + n) - 1)

        def tail(k1_max: int, k2_max: int, u1_abs) -> mpfr:
            alpha = max(mpfr(1), (S1 + k1_max + 1) / (k1_max + 2)) / q
            beta = max(mpfr(1), (S2 + k2_max + 1) / (k2_max + 2)) / q
            # region k1 > K1, any k2
            bd = sum((C2[k2] * D(k1_max + 1 + k2) for k2 in range(k2_max + 1)), mpfr(0))
            bd += C2[k2_max + 1] * D(k1_max + k2_max + 2) / (1 - beta)
            r1 = A(k1_max + 1) * bd / (1 - alpha / q)
            # region k1 <= K1, k2 > K2
            r2 = sum((u1_abs[k1] * D(k1 + k2_max + 1) for k1 in range(k1_max + 1)), mpfr(0))
            r2 *= C2[k2_max + 1] / (1 - beta)
            return (r1 + r2) * _MARGIN

        k2 = k_start
        while True:
            k1 = max(k_start, (k2 + 1) // 2)
            C1 = _rising_abs(S1, k1 + 2)
            C2 = _rising_abs(S2, k2 + 2)
            # crude |u1| majorant for the search; exact values used below
            u1_env = [
                C1[k] / abs(qpow_minus_one(base, x1 + k)) if (x1 + k) != 0 else C1[k - 1] / (k * base.log_q)
                for k in range(k1 + 1)
            ]
            if tail(k1, k2, u1_env) <= target:
                break
            k2 = int(k2 * 1.25) + 4
            if k2 > MAX_EXPANSION_INDEX:
                raise DomainError("expansion converges too slowly at this precision")

    u1, eps_u1 = _outer_factors(base, s1, k1, u)
    c2 = rising_coeffs(s2, k2)
    inv2, eps_inv = _inv_list(base, x0, k1 + k2, u)
    with gmpy2.context(precision=64):
        u1_abs = [abs(v) * (1 + eps_u1) for v in u1]
        tail_bound = tail(k1, k2, u1_abs)

    inv2_abs = [abs(v) for v in inv2]
    inner, inner_abs = kernels.correlate(c2, [mpfr(0)] + inv2, [mpfr(0)] + inv2_abs, k1 + 1)
    acc = mpfr(0)
    acc_abs = mpfr(0)
    for k in range(k1 + 1):
        acc = acc + u1[k] * inner[k]
        acc_abs = acc_abs + abs(u1[k]) * inner_abs[k]
    pref, eps_pref = _prefactor(base, s1 + s2)
    value = pref * acc

    complex_arg = not (is_real(s1) and is_real(s2))
    eps = (
        eps_u1
        + eps_inv
        + _coeff_rel_error(k2, complex_arg, u)
        + eps_pref * u
        + (k1 + k2 + 8) * u
    )
    with gmpy2.context(precision=64):
        bound = abs(pref) * (tail_bound + acc_abs * eps * _MARGIN) * _MARGIN
    out = ValueWithError(simplify(value), bound, (k1 + 1) * (k2 + 1), status, cutoff=k2)
    return out.rounded(ctx.mantissa_bits)


def zeta2_q_expansion(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """Double zeta function through its binomial expansion (continued)."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base = base.at(ctx)
        s1, s2 = (to_number(x, ctx.working_bits) for x in (s1, s2))
        return _double_expansion(base, ctx, s1, s2, shift=2)


def circ_expansion(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """Circ double zeta function through its binomial expansion (continued)."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base = base.at(ctx)
        s1, s2 = (to_number(x, ctx.working_bits) for x in (s1, s2))
        return _double_expansion(base, ctx, s1, s2, shift=1)


def zeta_q_expansion_single(s, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``(q-1)^s sum_k C(s,k) / (q^{s+k-1} - 1)``, the single q-zeta function
    continued away from ``s = 1 + 2 pi i b / log q``."""
    ctx = ctx or PrecisionCtx()
    u = ctx.unit_roundoff
    with ctx.context():
        base = base.at(ctx)
        s = to_number(s, ctx.working_bits)
        x1 = s - 1
        a1 = real_part(x1)
        k_crit = max(0, int(gmpy2.ceil(-a1)) + 1) if a1 <= 0 else 0
        status = _pole_status(base, ctx, [x1] + [x1 + k for k in range(1, k_crit + 1) if x1 + k != 0])
        S = abs(s)
        q = base.q
        target = ctx.abs_tol / 2
        k = max(2, int(gmpy2.ceil(-a1)) + 2)
        while not _envelope_ok(S, k, q):
            k += 1
        with gmpy2.context(precision=64):
            def tail(kk: int) -> mpfr:
                c = _rising_abs(S, kk + 1)[kk + 1]
                alpha = max(mpfr(1), (S + kk + 1) / (kk + 2)) / q
                return c / (q ** (a1 + kk + 1) - 1) / (1 - alpha) * _MARGIN

            while tail(k) > target:
                k = int(k * 1.25) + 2
                if k > MAX_EXPANSION_INDEX:
                    raise DomainError("expansion converges too slowly at this precision")
        terms, eps_terms = _outer_factors(base, s, k, u)
        acc = mpfr(0)
        acc_abs = mpfr(0)
        for t in terms:
            acc = acc + t
            acc_abs = acc_abs + abs(t)
        pref, eps_pref = _prefactor(base, s)
        value = pref * acc
        eps = eps_terms + eps_pref * u + (k + 6) * u
        with gmpy2.context(precision=64):
            bound = abs(pref) * (tail(k) + acc_abs * eps * _MARGIN) * _MARGIN
        out = ValueWithError(simplify(value), bound, k + 1, status, cutoff=k)
        return out.rounded(ctx.mantissa_bits)


# -- pole sets -------------------------------------------------------------


def _match_lattice(x: CVal, base: QBase, tol: mpfr):
    """Return ``(a, b)`` when ``x = a + 2 pi i b / log q`` with integer a, b."""
    re, im = real_part(x), imag_part(x)
    a = gmpy2.rint(re)
    if abs(re - a) >= tol:
        return None
    b_real = im * base.log_q / (2 * gmpy2.const_pi())
    b = gmpy2.rint(b_real)
    if abs(b_real - b) >= tol:
        return None
    return int(a), int(b)


def pole_classify(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> PoleClassification:
    """Classify ``(s1, s2)`` against the singular sets of the circ function:

    ``s1`` in ``{1 + 2 pi i b/log q}`` or ``{a + 2 pi i b/log q : a <= 0, b != 0}``,
    or ``s1 + s2`` in the same two families.
    """
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base = base.at(ctx)
        s1, s2 = (to_number(x, ctx.working_bits) for x in (s1, s2))
        tol = ctx.pole_threshold
        for name, z, shift in (("s1", s1, 1), ("s1+s2", s1 + s2, 1)):
            hit = _match_lattice(z, base, tol)
            if hit is None:
                continue
            a, b = hit
            if a == 1:
                return PoleClassification(True, simplify(z - shift), f"{name} = 1 + 2πib/log q, b={b}")
            if a <= 0 and b != 0:
                # the exponent z + k - 1 with k = 1 - a sits on the imaginary axis
                return PoleClassification(
                    True, simplify(z - a), f"{name} = a + 2πib/log q, a ≤ 0, b ≠ 0 (a={a}, b={b})"
                )
        return PoleClassification(False, None, "regular")


# -- limits at (0, 0) ------------------------------------------------------


def _escalated_bits(base_q: mpfr, ctx: PrecisionCtx) -> int:
    with gmpy2.context(precision=64):
        h = base_q - 1
        k = max(0, int(gmpy2.ceil(-gmpy2.log2(h))))
    return max(ctx.working_bits, ctx.mantissa_bits + 4 * k + ctx.guard_bits)


def zeta00_closed(base: QBase, order: LimitOrder | str, ctx: PrecisionCtx | None = None) -> mpfr:
    """Closed forms of the two iterated limits of the double zeta function
    at ``(0, 0)``:

        s2 first: 1/((1/q-1)(1/q^2-1)) + 1/((1/q-1) L) + 1/(2 (q-1) L)
        s1 first: 1/((1/q-1)(1/q^2-1)) + 3/(2 (1/q-1) L) + 1/L^2

    with ``L = log q``.  Precision is raised near ``q = 1`` where the three
    terms cancel.
    """
    ctx = ctx or PrecisionCtx()
    order = LimitOrder(order)
    bits = _escalated_bits(base.q, ctx)
    with gmpy2.context(precision=bits):
        q = base.q
        L = gmpy2.log(q)
        a = 1 / q - 1
        b = 1 / (q * q) - 1
        head = 1 / (a * b)
        if order is LimitOrder.S2_FIRST:
            out = head + 1 / (a * L) + 1 / (2 * (q - 1) * L)
        else:
            out = head + 3 / (2 * a * L) + 1 / (L * L)
    with gmpy2.context(precision=ctx.mantissa_bits):
        return +out


@dataclass(frozen=True)
class LimitTable:
    """Closed-form values at ``q_k = 1 + 2^-k`` and their extrapolated limit."""

    order: LimitOrder
    rows: tuple[tuple[mpfr, mpfr], ...]
    limit: mpfr
    error_estimate: mpfr


MAX_LIMIT_STEPS = 60


def limit_table(order: LimitOrder | str, steps: int, ctx: PrecisionCtx | None = None) -> LimitTable:
    """Richardson extrapolation of :func:`zeta00_closed` over
    ``q_k = 1 + 2^-k``, ``k = 4 .. 4 + steps``.

    The closed forms are analytic in ``h = q - 1`` near 0, so each
    extrapolation column removes one integer power of ``h``.
    """
    ctx = ctx or PrecisionCtx()
    order = LimitOrder(order)
    if steps < 1:
        raise DomainError("steps must be >= 1")
    if steps > MAX_LIMIT_STEPS:
        raise DomainError(f"steps > {MAX_LIMIT_STEPS} would need q - 1 below 2^-64; raise precision instead")
    ks = range(4, 4 + steps + 1)
    bits = ctx.mantissa_bits + 4 * ks[-1] + ctx.guard_bits
    wide = PrecisionCtx(max(ctx.mantissa_bits, bits - ctx.guard_bits), ctx.guard_bits)
    rows = []
    with gmpy2.context(precision=bits):
        for k in ks:
            q = 1 + gmpy2.mul_2exp(mpfr(1), -k)
            base = QBase.of(q, wide)
            rows.append((q, zeta00_closed(base, order, wide)))
        prev = [v for _, v in rows]
        table = [prev]
        for j in range(1, len(prev)):
            factor = mpfr(2) ** j - 1
            cur = [prev[i] + (prev[i] - prev[i - 1]) / factor for i in range(1, len(prev))]
            table.append(cur)
            prev = cur
        limit = table[-1][-1]
        err = abs(limit - table[-2][-1])
    with gmpy2.context(precision=ctx.mantissa_bits):
        out_rows = tuple((+q, +v) for q, v in rows)
        return LimitTable(order, out_rows, +limit, +err)


def limit_q_to_1(order: LimitOrder | str, steps: int, ctx: PrecisionCtx | None = None) -> mpfr:
    """Extrapolated ``q -> 1`` limit of the (0,0) closed form for ``order``."""
    return limit_table(order, steps, ctx).limit


_ASYMPTOTIC = {
    # (power of x, coefficient) in order; the first entry is the leading term
    "inv_xplus2": [(0, Fraction(1, 2)), (1, Fraction(-1, 4)), (2, Fraction(1, 8)), (3, Fraction(-1, 16))],
    "inv_log1p": [(-1, Fraction(1)), (0, Fraction(1, 2)), (1, Fraction(-1, 12)), (2, Fraction(1, 24))],
    "inv_log1p_sq": [(-2, Fraction(1)), (-1, Fraction(1)), (0, Fraction(1, 12)), (1, Fraction(0))],
}


def asymptotic_coefficients(which: str) -> list[tuple[int, Fraction]]:
    """``(power, coefficient)`` pairs of the small-x expansion of ``which``."""
    try:
        return list(_ASYMPTOTIC[which])
    except KeyError:
        raise ValueError(f"unknown expansion {which!r}; choose from {sorted(_ASYMPTOTIC)}") from None


def asymptotic_ref(x, which: str, terms: int, ctx: PrecisionCtx | None = None) -> mpfr:
    """Leading term plus ``terms`` corrections of the small-x expansion of
    ``1/(x+2)``, ``1/log(1+x)`` or ``1/log(1+x)^2``."""
    ctx = ctx or PrecisionCtx()
    coeffs = asymptotic_coefficients(which)
    if not 0 <= terms <= 3:
        raise ValueError("terms must be in 0..3")
    with ctx.context():
        x = to_number(x, ctx.working_bits)
        if not abs(x) < mpfr("0.5"):
            raise DomainError("asymptotic expansions need |x| < 1/2")
        acc = mpfr(0)
        for power, c in coeffs[: terms + 1]:
            if c == 0:
                continue
            if power < 0 and x == 0:
                raise DomainError(f"{which} is singular at x = 0")
            acc += mpfr(c.numerator) / c.denominator * x**power
        return acc


def iterated_limit_probe(
    n1: int,
    n2: int,
    base: QBase,
    delta_outer,
    delta_inner,
    ctx: PrecisionCtx | None = None,
    order: LimitOrder | str = LimitOrder.S2_FIRST,
) -> ValueWithError:
    """Emulate an iterated limit by scale separation.

    The variable whose limit is taken first gets the much smaller offset
    ``delta_inner <= delta_outer^2``: for ``s2_first`` the expansion is
    evaluated at ``(n1 + delta_outer, n2 + delta_inner)``, for ``s1_first``
    at ``(n1 + delta_inner, n2 + delta_outer)``.
    """
    ctx = ctx or PrecisionCtx()
    order = LimitOrder(order)
    with ctx.context():
        do = to_number(delta_outer, ctx.working_bits)
        di = to_number(delta_inner, ctx.working_bits)
        if not (0 < di < mpfr("1e-3") and 0 < do < mpfr("1e-3")):
            raise DomainError("probe offsets must lie in (0, 1e-3)")
        # one rounding of slack so that decimal inputs like 1e-6, 1e-12 qualify
        if not di <= do * do * (1 + gmpy2.mul_2exp(mpfr(1), -40)):
            raise DomainError("probe needs delta_inner <= delta_outer^2")
        if order is LimitOrder.S2_FIRST:
            s1, s2 = n1 + do, n2 + di
        else:
            s1, s2 = n1 + di, n2 + do
    return zeta2_q_expansion(s1, s2, base, ctx)
