import math
import random

import gmpy2
import pytest
from gmpy2 import mpc, mpfr

from qzeta.qnum import (
    DomainError,
    PrecisionCtx,
    QBase,
    Status,
    ValueWithError,
    inv_qpow_minus_one,
    q_factorial,
    q_number,
    q_pochhammer,
    q_pow,
    rising_coeff,
    to_number,
)


def test_precision_ctx_fields():
    c = PrecisionCtx(128, 16)
    assert c.working_bits == 144
    assert c.abs_tol == mpfr(2) ** -112
    assert c.doubled().mantissa_bits == 256
    with pytest.raises(ValueError):
        PrecisionCtx(32)
    with pytest.raises(ValueError):
        PrecisionCtx(128, 8)


def test_qbase_rejects_q_le_one():
    for bad in (1, "0.5", -2, "1"):
        with pytest.raises(DomainError):
            QBase.of(bad)


def test_qbase_log(ctx):
    b = QBase.of("7.5", ctx)
    with ctx.context():
        assert b.log_q > 0
        assert abs(gmpy2.exp(b.log_q) - b.q) <= ctx.abs_tol


def test_decimal_q_is_correctly_rounded(ctx):
    b = QBase.of("1.1", ctx)
    assert b.q == mpfr("1.1", ctx.working_bits)


@pytest.mark.parametrize("a,q,expected", [(0, 2, 0), (1, "7.5", 1), (2, 3, 4)])
def test_q_number_examples(a, q, expected, ctx):
    assert q_number(a, QBase.of(q, ctx), ctx) == expected


def test_q_number_pow_relation(ctx):
    rng = random.Random(7)
    base = QBase.of(2, ctx)
    for _ in range(100):
        a = to_number(f"{rng.uniform(-3, 3)},{rng.uniform(-3, 3)}", ctx.working_bits)
        with ctx.context():
            lhs = q_number(a, base, ctx) * base.q_minus_one + 1
            assert abs(lhs - q_pow(base, a, ctx)) <= ctx.abs_tol


def test_q_pow_examples(ctx):
    base = QBase.of(2, ctx)
    assert q_pow(base, 0, ctx) == 1
    assert q_pow(base, 3, ctx) == 8
    with ctx.context():
        period = mpc(0, 2 * gmpy2.const_pi() / base.log_q)
        assert abs(q_pow(base, period, ctx) - 1) <= ctx.abs_tol


def test_q_pow_modulus_law(ctx):
    rng = random.Random(3)
    base = QBase.of("1.7", ctx)
    for _ in range(25):
        s = to_number(f"{rng.uniform(-2, 4)},{rng.uniform(-5, 5)}", ctx.working_bits)
        x = rng.uniform(0.1, 3)
        with ctx.context():
            lhs = abs(q_pow(base, s * x, ctx))
            rhs = q_pow(base, s.real * x, ctx)
            assert abs(lhs - rhs) <= ctx.abs_tol * max(1, rhs)


def test_q_pow_overflow():
    with pytest.raises(DomainError):
        q_pow(QBase.of(2), "1e30")


def test_rising_coeff_examples():
    assert rising_coeff("2.5,1", 0) == 1
    assert rising_coeff(0, 3) == 0
    assert rising_coeff(2, 3) == 4
    assert rising_coeff(-2, 3) == 0
    assert rising_coeff("0.5", 2) == mpfr("0.375")


def test_rising_coeff_recurrence(ctx):
    s = to_number("1.3,-0.7", ctx.working_bits)
    with ctx.context():
        for k in range(1, 20):
            a = rising_coeff(s, k, ctx.working_bits) * k
            b = rising_coeff(s, k - 1, ctx.working_bits) * (s + k - 1)
            assert abs(a - b) <= abs(b) * ctx.unit_roundoff * 4


@pytest.mark.parametrize("n,q,expected", [(0, 2, 1), (2, 3, 4), (3, 2, 21)])
def test_q_factorial_examples(n, q, expected, ctx):
    assert q_factorial(n, QBase.of(q, ctx), ctx) == expected


def test_q_factorial_is_product_of_q_numbers(ctx):
    base = QBase.of("1.25", ctx)
    with ctx.context():
        for n in range(31):
            prod = mpfr(1)
            for j in range(1, n + 1):
                prod *= q_number(j, base, ctx)
            f = q_factorial(n, base, ctx)
            assert abs(f - prod) <= f * 4 * n * ctx.unit_roundoff + 0


def test_q_pochhammer(ctx):
    assert q_pochhammer("0.3", 2, 0, ctx) == 1
    with ctx.context():
        assert q_pochhammer("0.3", 2, 1, ctx) == 1 - mpfr("0.3", ctx.working_bits)
    assert q_pochhammer(1, "0.5", 4, ctx) == 0
    with pytest.raises(DomainError):
        q_pochhammer("0.5", 2, math.inf, ctx)
    # (1/2; 1/2)_inf against a long finite product
    inf = q_pochhammer("0.5", "0.5", math.inf, ctx)
    fin = q_pochhammer("0.5", "0.5", 400, ctx)
    with ctx.context():
        assert abs(inf - fin) <= ctx.abs_tol
        assert abs(inf - mpfr("0.288788095086602421278899721929230")) < mpfr("1e-33")


def test_inv_qpow_minus_one(ctx):
    base = QBase.of(2, ctx)
    assert inv_qpow_minus_one(base, 1, ctx).value == 1
    v = inv_qpow_minus_one(base, 2, ctx)
    with ctx.context():
        assert abs(v.value - mpfr(1) / 3) <= v.abs_error_bound
    with pytest.raises(DomainError):
        inv_qpow_minus_one(base, 0, ctx)
    with ctx.context():
        period = mpc(0, 2 * gmpy2.const_pi() / base.log_q)
    with pytest.raises(DomainError):
        inv_qpow_minus_one(base, period, ctx)
    near = inv_qpow_minus_one(base, "1e-25", ctx)
    assert near.status is Status.POLE_PROXIMATE


def test_value_with_error_arithmetic():
    a = ValueWithError(mpfr(1), mpfr("1e-10"))
    b = ValueWithError(mpfr(2), mpfr("1e-11"))
    c = a * b - a
    assert abs(c.value - 1) < 1e-15
    assert c.abs_error_bound >= mpfr("2e-10")
