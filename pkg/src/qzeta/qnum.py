"""Arbitrary-precision scaffolding and q-arithmetic primitives.

Every number in the package is a :mod:`gmpy2` ``mpfr`` (real) or ``mpc``
(complex) value.  Precision is never ambient: callers pass a
:class:`PrecisionCtx` and each operation opens its own ``gmpy2`` context at
``ctx.working_bits`` for the duration of the call.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Union

import gmpy2
from gmpy2 import mpc, mpfr

CVal = Union[mpfr, mpc]

DEFAULT_MANTISSA_BITS = 128
DEFAULT_GUARD_BITS = 16


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class Status(str, enum.Enum):
    CONVERGED = "converged"
    POLE_PROXIMATE = "pole_proximate"
    DOMAIN_ERROR = "domain_error"


@dataclass(frozen=True)
class PrecisionCtx:
    """Working precision for one evaluation.

    Accumulation happens at ``mantissa_bits + guard_bits``; results are
    rounded to ``mantissa_bits`` and certified to ``abs_tol``.
    """

    mantissa_bits: int = DEFAULT_MANTISSA_BITS
    guard_bits: int = DEFAULT_GUARD_BITS

    def __post_init__(self):
        if int(self.mantissa_bits) != self.mantissa_bits or self.mantissa_bits < 64:
            raise ValueError(f"mantissa_bits must be an integer >= 64, got {self.mantissa_bits}")
        if int(self.guard_bits) != self.guard_bits or self.guard_bits < 16:
            raise ValueError(f"guard_bits must be an integer >= 16, got {self.guard_bits}")

    @property
    def working_bits(self) -> int:
        return self.mantissa_bits + self.guard_bits

    @property
    def abs_tol(self) -> mpfr:
        return gmpy2.mul_2exp(mpfr(1), -(self.mantissa_bits - self.guard_bits))

    @property
    def unit_roundoff(self) -> mpfr:
        return gmpy2.mul_2exp(mpfr(1), -self.working_bits)

    @property
    def pole_threshold(self) -> mpfr:
        # 2^-(mantissa_bits/2); odd mantissas get the half bit via sqrt(2)
        with gmpy2.context(precision=64):
            return gmpy2.exp2(mpfr(-self.mantissa_bits) / 2)

    def context(self, extra_bits: int = 0) -> gmpy2.context:
        return gmpy2.context(precision=self.working_bits + extra_bits)

    def doubled(self) -> PrecisionCtx:
        return replace(self, mantissa_bits=2 * self.mantissa_bits)


def to_number(x, bits: int) -> CVal:
    """Convert ``x`` to an mpfr/mpc rounded to ``bits`` (exact when possible).

    Strings are parsed with correct rounding; ``"re,im"`` and Python complex
    syntax (``"2+1j"``) produce complex values.
    """
    with gmpy2.context(precision=bits):
        if isinstance(x, (mpfr, mpc)):
            return +x if x.precision != bits else x
        if isinstance(x, (int, gmpy2.mpz)):
            return mpfr(x)
        if isinstance(x, (Fraction, gmpy2.mpq)):
            return mpfr(gmpy2.mpq(x.numerator, x.denominator))
        if isinstance(x, float):
            return mpfr(x)
        if isinstance(x, complex):
            return mpc(mpfr(x.real), mpfr(x.imag))
        if isinstance(x, str):
            text = x.strip()
            if "," in text:
                re_text, im_text = text.split(",", 1)
                return mpc(mpfr(re_text.strip()), mpfr(im_text.strip()))
            if text.endswith(("j", "J")):
                return mpc(text)
            return mpfr(text)
    raise TypeError(f"cannot convert {type(x).__name__} to an arbitrary-precision number")


def real_part(x: CVal) -> mpfr:
    return x.real if isinstance(x, mpc) else x


def imag_part(x: CVal) -> mpfr:
    return x.imag if isinstance(x, mpc) else mpfr(0)


def is_real(x: CVal) -> bool:
    return not isinstance(x, mpc) or x.imag == 0


def simplify(x: CVal) -> CVal:
    """Drop an exactly-zero imaginary part."""
    if isinstance(x, mpc) and x.imag == 0:
        return x.real
    return x


def check_finite(x: CVal, what: str = "value") -> CVal:
    parts = (x.real, x.imag) if isinstance(x, mpc) else (x,)
    if not all(gmpy2.is_finite(p) for p in parts):
        raise DomainError(f"{what} is not finite ({x}); exponent range exceeded")
    return x


@dataclass(frozen=True)
class QBase:
    """The deformation parameter ``q > 1`` with its logarithm cached.

    ``q`` is stored exactly; :meth:`at` re-derives ``log_q`` when a caller
    needs more bits without perturbing ``q`` itself.
    """

    q: mpfr
    log_q: mpfr
    bits: int

    @classmethod
    def of(cls, q, ctx: PrecisionCtx | None = None) -> QBase:
        bits = (ctx or PrecisionCtx()).working_bits
        qv = to_number(q, bits)
        if isinstance(qv, mpc):
            if qv.imag != 0:
                raise DomainError("q must be real")
            qv = qv.real
        if not gmpy2.is_finite(qv) or not qv > 1:
            raise DomainError(f"q must satisfy q > 1, got {qv}")
        with gmpy2.context(precision=bits):
            log_q = gmpy2.log(qv)
        return cls(q=qv, log_q=log_q, bits=bits)

    def at(self, ctx: PrecisionCtx) -> QBase:
        bits = ctx.working_bits
        if bits == self.bits:
            return self
        with gmpy2.context(precision=max(bits, self.q.precision)):
            q = +self.q
        with gmpy2.context(precision=bits):
            return QBase(q=q, log_q=gmpy2.log(q), bits=bits)

    @property
    def q_minus_one(self) -> mpfr:
        # exact: q - 1 is representable whenever q is
        with gmpy2.context(precision=self.q.precision + 2):
            return self.q - 1

    def __float__(self) -> float:
        return float(self.q)


@dataclass(frozen=True)
class ValueWithError:
    """A value with a rigorous absolute error bound.

    ``terms_used`` counts the series terms (lattice points) actually summed;
    ``cutoff`` records the largest index reached, used when re-summing at a
    larger truncation.
    """

    value: CVal
    abs_error_bound: mpfr
    terms_used: int = 0
    status: Status = Status.CONVERGED
    cutoff: int = 0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @staticmethod
    def exact(x: CVal) -> ValueWithError:
        return ValueWithError(x, mpfr(0))

    def _combine(self, other: ValueWithError, value: CVal, bound: mpfr) -> ValueWithError:
        status = self.status if self.status is not Status.CONVERGED else other.status
        return ValueWithError(
            value,
            bound,
            self.terms_used + other.terms_used,
            status,
            max(self.cutoff, other.cutoff),
        )

    def _rounding(self, value: CVal, bits: int) -> mpfr:
        # one correctly rounded operation per component
        scale = 2 if isinstance(value, mpc) else 1
        return abs(value) * scale * gmpy2.mul_2exp(mpfr(1), -bits)

    def _bits(self, other=None) -> int:
        bits = [self.value.precision if isinstance(self.value, mpfr) else self.value.precision[0]]
        if isinstance(other, ValueWithError):
            v = other.value
            bits.append(v.precision if isinstance(v, mpfr) else v.precision[0])
        return max(bits)

    def __add__(self, other) -> ValueWithError:
        if not isinstance(other, ValueWithError):
            other = ValueWithError.exact(other)
        bits = self._bits(other)
        with gmpy2.context(precision=bits):
            value = self.value + other.value
            bound = self.abs_error_bound + other.abs_error_bound + self._rounding(value, bits)
        return self._combine(other, simplify(value), bound)

    __radd__ = __add__

    def __neg__(self) -> ValueWithError:
        return replace(self, value=-self.value)

    def __sub__(self, other) -> ValueWithError:
        if not isinstance(other, ValueWithError):
            other = ValueWithError.exact(other)
        return self + (-other)

    def __rsub__(self, other) -> ValueWithError:
        return (-self) + other

    def __mul__(self, other) -> ValueWithError:
        if not isinstance(other, ValueWithError):
            other = ValueWithError.exact(other if isinstance(other, (mpfr, mpc)) else mpfr(other))
        bits = self._bits(other)
        with gmpy2.context(precision=bits):
            value = self.value * other.value
            ea, eb = self.abs_error_bound, other.abs_error_bound
            bound = abs(self.value) * eb + abs(other.value) * ea + ea * eb
            bound += self._rounding(value, bits)
        return self._combine(other, simplify(value), bound)

    __rmul__ = __mul__

    def rounded(self, bits: int) -> ValueWithError:
        """Round the value to ``bits`` and widen the bound accordingly."""
        with gmpy2.context(precision=bits):
            value = +self.value
        with gmpy2.context(precision=max(bits, 64)):
            bound = self.abs_error_bound + abs(value - self.value) * 2
        return replace(self, value=simplify(value), abs_error_bound=bound)


def q_number(a, base: QBase, ctx: PrecisionCtx | None = None) -> CVal:
    """The q-analogue ``[a]_q = (q^a - 1)/(q - 1)``."""
    ctx = ctx or PrecisionCtx()
    base = base.at(ctx)
    a = to_number(a, ctx.working_bits)
    with ctx.context():
        return simplify(qpow_minus_one(base, a) / base.q_minus_one)


def qpow_minus_one(base: QBase, x: CVal) -> CVal:
    """``q^x - 1`` without cancellation for small ``x`` (current context)."""
    prec = gmpy2.get_context().precision
    if is_real(x):
        xr = real_part(x)
        if xr.is_integer() and 0 <= xr <= 64:
            # q^n is exact at n times the precision of q; one final rounding
            with gmpy2.context(precision=max(2, _bits_of(base.q)) * max(int(xr), 1) + 2):
                d = base.q ** int(xr) - 1
            return +d
        return gmpy2.expm1(xr * base.log_q)
    z = x * base.log_q
    lost = 0
    if abs(z) < 1:
        mag = abs(z)
        lost = 0 if mag == 0 else max(0, -int(gmpy2.floor(gmpy2.log2(mag))) + 2)
    with gmpy2.context(precision=prec + lost + 8):
        z = mpc(x) * base.log_q
        # exp(re) * (cos + i sin) - 1 with expm1/sin-based cancellation control
        e = gmpy2.expm1(z.real)
        c = -2 * gmpy2.sin(z.imag / 2) ** 2
        s = gmpy2.sin(z.imag)
        re = e + c + e * c
        im = (e + 1) * s
        out = mpc(re, im)
    return +out


def q_pow(base: QBase, s, ctx: PrecisionCtx | None = None) -> CVal:
    """``q^s = exp(s log q)`` on the principal branch.

    Integer and real exponents use correctly rounded powers, so
    ``q_pow(base, 0) == 1`` and small integer powers are exact.
    """
    ctx = ctx or PrecisionCtx()
    base = base.at(ctx)
    s = to_number(s, ctx.working_bits)
    with ctx.context():
        if is_real(s):
            sr = real_part(s)
            if sr.is_integer() and abs(sr) < 2**62:
                out = base.q ** int(sr)
            else:
                out = base.q ** sr
        else:
            modulus = base.q ** s.real
            angle = s.imag * base.log_q
            out = mpc(modulus * gmpy2.cos(angle), modulus * gmpy2.sin(angle))
        return check_finite(out, "q^s")


def rising_coeff(s, k: int, bits: int | None = None) -> CVal:
    """``s(s+1)...(s+k-1)/k!`` by the recurrence ``C_k = C_{k-1}(s+k-1)/k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    bits = bits or PrecisionCtx().working_bits
    s = to_number(s, bits)
    with gmpy2.context(precision=bits):
        c = mpfr(1)
        for j in range(1, k + 1):
            c = c * (s + (j - 1)) / j
        return simplify(c) if isinstance(c, mpc) else c


def rising_coeffs(s: CVal, k_max: int) -> list[CVal]:
    """All coefficients ``C(s, 0..k_max)`` in the current context."""
    out = [mpfr(1)]
    c = mpfr(1)
    for j in range(1, k_max + 1):
        c = c * (s + (j - 1)) / j
        out.append(c)
    return out


def q_factorial(n: int, base: QBase, ctx: PrecisionCtx | None = None) -> mpfr:
    """``[n]_q! = [1]_q [2]_q ... [n]_q`` with ``[0]_q! = 1``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    ctx = ctx or PrecisionCtx()
    base = base.at(ctx)
    with ctx.context():
        out = mpfr(1)
        qm1 = base.q_minus_one
        for j in range(1, n + 1):
            out *= (base.q**j - 1) / qm1
        return out


def q_pochhammer(a, ratio, n, ctx: PrecisionCtx | None = None) -> CVal:
    """The shifted factorial ``prod_{m<n} (1 - a ratio^m)``.

    ``n`` may be ``math.inf``; the infinite product needs ``|ratio| < 1``
    (pass ``1/q`` in the ``q > 1`` setting).
    """
    ctx = ctx or PrecisionCtx()
    bits = ctx.working_bits
    a = to_number(a, bits)
    ratio = to_number(ratio, bits)
    with ctx.context():
        if n != math.inf:
            if int(n) != n or n < 0:
                raise ValueError("n must be a nonnegative integer or math.inf")
            out = mpfr(1)
            p = mpfr(1)
            for _ in range(int(n)):
                out *= 1 - a * p
                p *= ratio
            return simplify(out)
        if a == 0:
            return mpfr(1)
        r = abs(ratio)
        if r >= 1:
            raise DomainError("infinite q-Pochhammer product diverges for |ratio| >= 1")
        # stop once the remaining factors move the product by < ulp
        target = ctx.unit_roundoff * (1 - r) / 4
        out = mpfr(1)
        p = mpfr(1)
        while abs(a) * abs(p) >= target:
            out *= 1 - a * p
            p *= ratio
        return simplify(out)


def inv_qpow_minus_one(base: QBase, x, ctx: PrecisionCtx | None = None) -> ValueWithError:
    """``1/(q^x - 1)`` with pole detection.

    Exact poles (``x log q`` an exact multiple of ``2 pi i``) raise
    :class:`DomainError`; values with ``|q^x - 1|`` below the pole threshold
    come back flagged :attr:`Status.POLE_PROXIMATE`.
    """
    ctx = ctx or PrecisionCtx()
    base = base.at(ctx)
    x = to_number(x, ctx.working_bits)
    if exact_pole_index(x, base, ctx) is not None:
        raise DomainError(f"q^x = 1 at x = {x}")
    u = ctx.unit_roundoff
    with ctx.context():
        d = qpow_minus_one(base, x)
        if d == 0:
            raise DomainError(f"q^x - 1 underflows to zero at x = {x}")
        value = simplify(1 / d)
        rel = denominator_rel_error(base, x, d, u)
        bound = abs(value) * rel
    status = Status.POLE_PROXIMATE if abs(d) < ctx.pole_threshold else Status.CONVERGED
    return ValueWithError(value, bound, 1, status)


def denominator_rel_error(base: QBase, x: CVal, d: CVal, u: mpfr) -> mpfr:
    """Relative error bound of a computed reciprocal ``1/(q^x - 1)``.

    Argument rounding in ``x log q`` is amplified by ``|x log q| q^Re(x)/|d|``.
    """
    growth = abs(x) * base.log_q * (base.q ** real_part(x)) / abs(d)
    return u * (8 + 4 * growth)


def exact_pole_index(x: CVal, base: QBase, ctx: PrecisionCtx) -> int | None:
    """Return ``b`` when ``q^x = 1`` exactly, i.e. ``x = 2 pi i b / log q``.

    ``Re(x)`` must be exactly zero; the imaginary part is matched to an
    integer multiple of ``2 pi / log q`` within the pole threshold.
    """
    if real_part(x) != 0:
        return None
    im = imag_part(x)
    if im == 0:
        return 0
    with ctx.context():
        b = im * base.log_q / (2 * gmpy2.const_pi())
        nearest = gmpy2.rint(b)
        if abs(b - nearest) < ctx.pole_threshold:
            return int(nearest)
    return None


def _bits_of(x: mpfr) -> int:
    p = x.precision
    return p if isinstance(p, int) else p[0]
