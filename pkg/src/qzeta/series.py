"""Direct-summation evaluators for q > 1 zeta series with rigorous tails.

Every summand has the shape ``q^{e n} [n]_q^{-s}``.  Since
``[n]_q = (q^n - 1)/(q - 1)`` is real and positive,

    |q^{e n} [n]_q^{-s}| = (q-1)^sigma q^{n(e - sigma)} (1 - q^{-n})^{-sigma},

with ``sigma = Re(s)``, which gives a geometric envelope ``K rho^n`` valid
for all ``n >= n0``.  The evaluators pick truncation points from these
envelopes, sum at ``ctx.working_bits`` and report tail plus rounding error.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from . import kernels
from .qnum import (
    CVal,
    DomainError,
    PrecisionCtx,
    QBase,
    ValueWithError,
    is_real,
    real_part,
    simplify,
    to_number,
)

MAX_INDEX = 2_000_000
MAX_BOX_POINTS = 50_000_000
MAX_MT_DEPTH = 4

_MARGIN = 1 + gmpy2.mul_2exp(mpfr(1), -20)


class SeriesKind(str, enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"
    DOUBLE_STAR = "double_star"
    CIRC = "circ"
    CIRC_STAR = "circ_star"
    MORDELL_TORNHEIM = "mordell_tornheim"


@dataclass(frozen=True)
class TruncationPlan:
    """Where a series is cut and why.

    ``tail_ratio`` is the geometric ratio ``q^(e - sigma)`` of the outermost
    free index; ``inner_limit`` describes how the remaining indices are cut.
    """

    outer_limit: int
    inner_limit: str
    tail_ratio: mpfr
    tail_bound: mpfr


# -- envelopes -------------------------------------------------------------


def _envelope_const(base: QBase, sigma: mpfr, n0: int) -> mpfr:
    """``K`` with ``|q^{en}[n]^{-s}| <= K q^{n(e - sigma)}`` for ``n >= n0``."""
    k = base.q_minus_one**sigma
    if sigma > 0:
        k *= (1 - base.q ** (-n0)) ** (-sigma)
    return k * _MARGIN


def _ratio(base: QBase, sigma: mpfr, e: int) -> mpfr:
    return base.q ** (e - sigma)


def _geom_tail(k: mpfr, rho: mpfr, n0: int) -> mpfr:
    """``sum_{n >= n0} k rho^n`` for ``rho < 1``."""
    return k * rho**n0 / (1 - rho)


def _first_index(tail: Callable[[int], mpfr], target: mpfr, start: int = 1) -> int:
    """Smallest ``n >= start`` with ``tail(n) <= target`` (``tail`` decreasing)."""
    if tail(start) <= target:
        return start
    lo, hi = start, start + 1
    while tail(hi) > target:
        lo, hi = hi, 2 * hi
        if hi > 4 * MAX_INDEX:
            raise DomainError("series converges too slowly for direct summation")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def _check_index(n: int) -> int:
    if n > MAX_INDEX:
        raise DomainError(f"truncation index {n} exceeds {MAX_INDEX}; series converges too slowly")
    return n


# -- summands --------------------------------------------------------------


class _Brackets:
    """``log [n]_q`` for ``n = 1..n_max`` in the current context."""

    def __init__(self, base: QBase, n_max: int):
        qm1 = base.q_minus_one
        self.base = base
        self.log = [mpfr(0)]
        for n in range(1, n_max + 1):
            self.log.append(gmpy2.log((base.q**n - 1) / qm1))

    def extend(self, n_max: int) -> None:
        qm1 = self.base.q_minus_one
        for n in range(len(self.log), n_max + 1):
            self.log.append(gmpy2.log((self.base.q**n - 1) / qm1))

    def weights(self, s: CVal, e: int, n_max: int, index_power: int = 0) -> list:
        """``[0, w_1, ..., w_{n_max}]`` with ``w_n = n^p q^{e n} [n]^{-s}``."""
        self.extend(n_max)
        L = self.base.log_q
        out = [mpfr(0)]
        if is_real(s):
            sr = real_part(s)
            for n in range(1, n_max + 1):
                out.append(gmpy2.exp(L * (e * n) - sr * self.log[n]))
        else:
            for n in range(1, n_max + 1):
                out.append(gmpy2.exp(L * (e * n) - s * self.log[n]))
        if index_power:
            for n in range(1, n_max + 1):
                out[n] = out[n] * n**index_power
        return out


def _weight_rel_error(base: QBase, s: CVal, e: int, n_max: int, u: mpfr) -> mpfr:
    """Relative error of one computed summand ``q^{en}[n]^{-s}``, n <= n_max.

    ``[n]_q`` picks up ``u (q/(q-1) + 3)`` from ``q^n - 1``; its log adds
    ``u |log [n]|``; the exponent ``e n L - s log[n]`` adds rounding
    proportional to its size, which ``exp`` turns into relative error.
    """
    with gmpy2.context(precision=64):
        q = base.q
        kappa = q / (q - 1)
        lb_max = n_max * base.log_q + max(mpfr(0), -gmpy2.log(q - 1))
        s_abs = abs(s)
        eps = 8 + 4 * e * n_max * base.log_q + s_abs * (kappa + 4 + 6 * lb_max)
        return u * eps * _MARGIN


def _sigma(s: CVal) -> mpfr:
    return real_part(s)


def _prep(base: QBase, ctx: PrecisionCtx, *args):
    base = base.at(ctx)
    return base, [to_number(a, ctx.working_bits) for a in args]


# -- single sums -----------------------------------------------------------


def _single(
    base: QBase,
    ctx: PrecisionCtx,
    s: CVal,
    e: int,
    index_power: int = 0,
) -> tuple[ValueWithError, TruncationPlan]:
    sigma = _sigma(s)
    rho = _ratio(base, sigma, e)
    target = ctx.abs_tol / 2
    u = ctx.unit_roundoff

    def tail(n0: int) -> mpfr:
        k = _envelope_const(base, sigma, n0)
        if index_power == 0:
            return _geom_tail(k, rho, n0)
        # sum_{n >= n0} n rho^n
        return k * rho**n0 * (n0 - (n0 - 1) * rho) / (1 - rho) ** 2

    n_max = _check_index(_first_index(tail, target) - 1)
    n_max = max(n_max, 1)
    w = _Brackets(base, n_max).weights(s, e, n_max, index_power)
    acc = mpfr(0)
    acc_abs = mpfr(0)
    for n in range(1, n_max + 1):
        acc = acc + w[n]
        acc_abs = acc_abs + abs(w[n])
    eps = _weight_rel_error(base, s, e, n_max, u) + (n_max + 2) * u
    bound = tail(n_max + 1) + acc_abs * eps * _MARGIN
    plan = TruncationPlan(n_max, "none", rho, tail(n_max + 1))
    out = ValueWithError(simplify(acc), bound, n_max, cutoff=n_max)
    return out.rounded(ctx.mantissa_bits), plan


def zeta_q(s, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{n>=1} q^n / [n]_q^s`` for ``Re(s) > 1``."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s,) = _prep(base, ctx, s)
        if not _sigma(s) > 1:
            raise DomainError(f"zeta_q needs Re(s) > 1, got Re(s) = {_sigma(s)}")
        return _single(base, ctx, s, 1)[0]


def diag_zeta_q(s, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{n>=1} q^{2n} / [n]_q^s`` for ``Re(s) > 2``."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s,) = _prep(base, ctx, s)
        if not _sigma(s) > 2:
            raise DomainError(f"the q^(2n) series needs Re(s) > 2, got {_sigma(s)}")
        return _single(base, ctx, s, 2)[0]


def index_weighted_zeta_q(s, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{n>=1} n q^n / [n]_q^s`` for ``Re(s) > 1``."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s,) = _prep(base, ctx, s)
        if not _sigma(s) > 1:
            raise DomainError(f"index-weighted series needs Re(s) > 1, got {_sigma(s)}")
        return _single(base, ctx, s, 1, index_power=1)[0]


# -- nested double sums ----------------------------------------------------


def _nested(
    base: QBase,
    ctx: PrecisionCtx,
    s_outer: CVal,
    e_outer: int,
    s_inner: CVal,
    e_inner: int,
    strict: bool,
) -> tuple[ValueWithError, TruncationPlan]:
    """``sum_{k1 > k2 >= 1} a(k1) b(k2)`` (``>=`` when not strict).

    ``a(k) = q^{e_outer k}[k]^{-s_outer}`` carries the larger index.  The
    inner sums over ``k1`` are accumulated backwards as suffix sums, so no
    partial sum is ever subtracted from a full value.
    """
    sa, sb = _sigma(s_outer), _sigma(s_inner)
    rho_a = _ratio(base, sa, e_outer)
    rho_b = _ratio(base, sb, e_inner)
    rho_ab = rho_a * rho_b
    delta = 1 if strict else 0
    u = ctx.unit_roundoff
    quarter = ctx.abs_tol / 4

    def outer_tail(n2: int) -> mpfr:
        # lattice points with k2 > n2
        ka = _envelope_const(base, sa, n2 + 1)
        kb = _envelope_const(base, sb, n2 + 1)
        return ka * kb * rho_a**delta / (1 - rho_a) * rho_ab ** (n2 + 1) / (1 - rho_ab)

    n2 = _check_index(max(_first_index(outer_tail, quarter, 0), 1))
    brackets = _Brackets(base, n2)
    b = brackets.weights(s_inner, e_inner, n2)
    with gmpy2.context(precision=64):
        b_abs_total = sum((abs(x) for x in b), mpfr(0)) * _MARGIN

    def inner_tail(n1: int) -> mpfr:
        # k1 > n1 for every retained k2
        return b_abs_total * _geom_tail(_envelope_const(base, sa, n1 + 1), rho_a, n1 + 1)

    n1 = _check_index(max(_first_index(inner_tail, quarter, n2 + 1), n2 + 1))
    a = brackets.weights(s_outer, e_outer, n1)

    suffix = [mpfr(0)] * (n1 + 2)
    suffix_abs = [mpfr(0)] * (n1 + 2)
    for k in range(n1, 0, -1):
        suffix[k] = suffix[k + 1] + a[k]
        suffix_abs[k] = suffix_abs[k + 1] + abs(a[k])
    acc = mpfr(0)
    acc_abs = mpfr(0)
    for k2 in range(1, n2 + 1):
        acc = acc + b[k2] * suffix[k2 + delta]
        acc_abs = acc_abs + abs(b[k2]) * suffix_abs[k2 + delta]

    eps = (
        _weight_rel_error(base, s_outer, e_outer, n1, u)
        + _weight_rel_error(base, s_inner, e_inner, n2, u)
        + (n1 + n2 + 6) * u
    )
    tails = outer_tail(n2) + inner_tail(n1)
    bound = tails + acc_abs * eps * _MARGIN
    points = sum(n1 - k2 + 1 - delta for k2 in range(1, n2 + 1))
    plan = TruncationPlan(n2, f"larger index summed to {n1}", rho_ab, tails)
    out = ValueWithError(simplify(acc), bound, points, cutoff=n1)
    return out.rounded(ctx.mantissa_bits), plan


def _check_double(name: str, s1: CVal, s2: CVal, min_sum: int) -> None:
    s1r, s2r = _sigma(s1), _sigma(s2)
    if not s1r > 1:
        raise DomainError(f"{name} needs Re(s1) > 1, got {s1r}")
    if not s1r + s2r > min_sum:
        raise DomainError(f"{name} needs Re(s1) + Re(s2) > {min_sum}, got {s1r + s2r}")


def zeta2_q(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{k1 > k2 >= 1} q^{k1} q^{k2} / ([k1]^{s1} [k2]^{s2})``.

    Requires ``Re(s1) > 1`` and ``Re(s1) + Re(s2) > 2``.
    """
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s1, s2) = _prep(base, ctx, s1, s2)
        _check_double("zeta2_q", s1, s2, 2)
        return _nested(base, ctx, s1, 1, s2, 1, strict=True)[0]


def zeta2_star_q(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{k1 >= k2 >= 1} q^{k1} q^{k2} / ([k1]^{s1} [k2]^{s2})``."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s1, s2) = _prep(base, ctx, s1, s2)
        _check_double("zeta2_star_q", s1, s2, 2)
        return _nested(base, ctx, s1, 1, s2, 1, strict=False)[0]


def circ_q(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{n1 > n2 >= 1} q^{n1} / ([n1]^{s1} [n2]^{s2})``.

    Requires ``Re(s1) > 1`` and ``Re(s1) + Re(s2) > 1``.
    """
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s1, s2) = _prep(base, ctx, s1, s2)
        _check_double("circ_q", s1, s2, 1)
        return _nested(base, ctx, s1, 1, s2, 0, strict=True)[0]


def circ_star_q(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{n1 >= n2 >= 1} q^{n1} / ([n1]^{s1} [n2]^{s2})``."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s1, s2) = _prep(base, ctx, s1, s2)
        _check_double("circ_star_q", s1, s2, 1)
        return _nested(base, ctx, s1, 1, s2, 0, strict=False)[0]


# -- box sums (Mordell-Tornheim shape) -------------------------------------


def _box(
    base: QBase,
    ctx: PrecisionCtx,
    factors: Sequence[tuple[CVal, int]],
    total: tuple[CVal, int],
) -> tuple[ValueWithError, TruncationPlan]:
    """``sum_{m in N^r} prod_i w_i(m_i) * w_total(m_1 + ... + m_r)``.

    ``w(m) = q^{e m}[m]^{-s}`` for each ``(s, e)`` pair.  The summand is
    enveloped by ``K prod_i R_i^{m_i}`` with ``R_i = rho_i rho_total``, so
    the mass outside the box ``[1, N_1] x ... x [1, N_r]`` is at most
    ``K (prod G_i - prod G_i(N_i))`` where ``G = R/(1 - R)``.
    """
    r = len(factors)
    u = ctx.unit_roundoff
    s_t, e_t = total
    rho_t = _ratio(base, _sigma(s_t), e_t)
    ratios = []
    k = _envelope_const(base, _sigma(s_t), r)
    for s_i, e_i in factors:
        ratios.append(_ratio(base, _sigma(s_i), e_i) * rho_t)
        k *= _envelope_const(base, _sigma(s_i), 1)
    if any(not R < 1 for R in ratios):
        raise DomainError("box sum diverges: every factor needs rho_i * rho_total < 1")
    g_full = [R / (1 - R) for R in ratios]
    target = ctx.abs_tol / (2 * r)
    limits = []
    for i, R in enumerate(ratios):
        others = k
        for j, g in enumerate(g_full):
            if j != i:
                others *= g
        n_i = _first_index(lambda n, R=R, c=others: c * R ** (n + 1) / (1 - R), target, 1)
        limits.append(_check_index(n_i))
    points = math.prod(limits)
    if points > MAX_BOX_POINTS:
        raise DomainError(f"box sum needs {points} lattice points; limit is {MAX_BOX_POINTS}")

    brackets = _Brackets(base, sum(limits))
    weights = [brackets.weights(s_i, e_i, n) for (s_i, e_i), n in zip(factors, limits)]
    total_w = brackets.weights(s_t, e_t, sum(limits))
    value = kernels.naive_box(weights, total_w)

    g_trunc = [R * (1 - R**n) / (1 - R) for R, n in zip(ratios, limits)]
    tail = k * (math.prod(g_full) - math.prod(g_trunc))
    abs_mass = k * math.prod(g_trunc)
    eps = sum(_weight_rel_error(base, s_i, e_i, n, u) for (s_i, e_i), n in zip(factors, limits))
    eps += _weight_rel_error(base, s_t, e_t, sum(limits), u)
    eps += (points + 2 * r + 4) * u
    bound = tail * _MARGIN + abs_mass * eps * _MARGIN
    plan = TruncationPlan(limits[0], f"box limits {limits}", ratios[0], tail)
    out = ValueWithError(simplify(value), bound, points, cutoff=max(limits))
    return out.rounded(ctx.mantissa_bits), plan


def mt_q(
    s_front: Sequence,
    s_last,
    base: QBase,
    ctx: PrecisionCtx | None = None,
) -> ValueWithError:
    """The q-Mordell-Tornheim sum

        sum_{m_1..m_r >= 1} q^{m_1}...q^{m_r} q^{M} / ([m_1]^{s_1}...[m_r]^{s_r} [M]^{s_last})

    with ``M = m_1 + ... + m_r``.  Requires ``Re(s_i + s_last) > 2`` for
    every ``i`` and ``1 <= r <= 4``.
    """
    ctx = ctx or PrecisionCtx()
    r = len(s_front)
    if r < 1:
        raise DomainError("mt_q needs at least one front argument")
    if r > MAX_MT_DEPTH:
        raise DomainError(f"mt_q supports depth r <= {MAX_MT_DEPTH}, got r = {r}")
    with ctx.context():
        base, vals = _prep(base, ctx, *s_front, s_last)
        front, last = vals[:-1], vals[-1]
        for i, s_i in enumerate(front, 1):
            if not _sigma(s_i) + _sigma(last) > 2:
                raise DomainError(f"mt_q needs Re(s_{i} + s_last) > 2, got {_sigma(s_i) + _sigma(last)}")
        return _box(base, ctx, [(s_i, 1) for s_i in front], (last, 1))[0]


def zeta2_q_reindexed(s1, s2, base: QBase, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``sum_{k1, k2 >= 1} q^{k1+k2} q^{k2} / ([k1+k2]^{s1} [k2]^{s2})``, summed
    over the box independently of :func:`zeta2_q`."""
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        base, (s1, s2) = _prep(base, ctx, s1, s2)
        _check_double("zeta2_q_reindexed", s1, s2, 2)
        return _box(base, ctx, [(mpfr(0), 0), (s2, 1)], (s1, 1))[0]


def truncation_plan(kind: SeriesKind | str, *args, base: QBase, ctx: PrecisionCtx | None = None) -> TruncationPlan:
    """The truncation an evaluator of ``kind`` would use for ``args``."""
    ctx = ctx or PrecisionCtx()
    kind = SeriesKind(kind)
    with ctx.context():
        if kind is SeriesKind.MORDELL_TORNHEIM:
            front, last = args
            base, vals = _prep(base, ctx, *front, last)
            return _box(base, ctx, [(x, 1) for x in vals[:-1]], (vals[-1], 1))[1]
        base, vals = _prep(base, ctx, *args)
        if kind is SeriesKind.SINGLE:
            return _single(base, ctx, vals[0], 1)[1]
        e_inner = 0 if kind in (SeriesKind.CIRC, SeriesKind.CIRC_STAR) else 1
        strict = kind in (SeriesKind.DOUBLE, SeriesKind.CIRC)
        return _nested(base, ctx, vals[0], 1, vals[1], e_inner, strict)[1]


EVALUATORS = {
    SeriesKind.SINGLE: zeta_q,
    SeriesKind.DOUBLE: zeta2_q,
    SeriesKind.DOUBLE_STAR: zeta2_star_q,
    SeriesKind.CIRC: circ_q,
    SeriesKind.CIRC_STAR: circ_star_q,
    SeriesKind.MORDELL_TORNHEIM: mt_q,
}


# -- brute-force oracle ----------------------------------------------------


def naive_oracle(kind: SeriesKind | str, *args, base: QBase, cutoff: int, prec_bits: int | None = None) -> CVal:
    """Plain truncated sum with every index ``<= cutoff``; no tail estimate.

    Brackets come from the recurrence ``[n+1] = q [n] + 1`` and powers of q
    from repeated multiplication, so this shares no arithmetic with the
    evaluators above.  ``args`` is ``(s,)``, ``(s1, s2)`` or
    ``(s_front, s_last)`` depending on ``kind``.
    """
    kind = SeriesKind(kind)
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    bits = prec_bits or base.bits
    with gmpy2.context(precision=bits):
        q = to_number(base.q, bits)
        if kind is SeriesKind.MORDELL_TORNHEIM:
            front, last = args
            r = len(front)
            n_max = r * cutoff
        else:
            n_max = cutoff
        qpow = [mpfr(1)]
        br = [mpfr(0)]
        for n in range(1, n_max + 1):
            qpow.append(qpow[-1] * q)
            br.append(br[-1] * q + 1)

        def powneg(x: mpfr, s) -> CVal:
            s = to_number(s, bits)
            return x ** (-s) if is_real(s) else mpc(x) ** (-s)

        def seq(s, e: int, n: int) -> list:
            s = to_number(s, bits)
            if is_real(s):
                s = real_part(s)
            return [mpfr(0)] + [qpow[k] ** e * powneg(br[k], s) if e else powneg(br[k], s) for k in range(1, n + 1)]

        if kind is SeriesKind.SINGLE:
            acc = mpfr(0)
            for t in seq(args[0], 1, cutoff)[1:]:
                acc = acc + t
            return simplify(acc)
        if kind is SeriesKind.MORDELL_TORNHEIM:
            facs = [seq(s_i, 1, cutoff) for s_i in front]
            return simplify(kernels.naive_box(facs, seq(last, 1, n_max)))
        s1, s2 = args
        e2 = 0 if kind in (SeriesKind.CIRC, SeriesKind.CIRC_STAR) else 1
        strict = kind in (SeriesKind.DOUBLE, SeriesKind.CIRC)
        return simplify(kernels.naive_triangle(seq(s1, 1, cutoff), seq(s2, e2, cutoff), strict))
