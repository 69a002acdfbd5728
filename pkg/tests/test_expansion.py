from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpc, mpfr

from qzeta import expansion, series
from qzeta.expansion import LimitOrder
from qzeta.qnum import DomainError, PrecisionCtx, QBase


def agree(a, b):
    with gmpy2.context(precision=400):
        return abs(a.value - b.value) <= a.abs_error_bound + b.abs_error_bound


@pytest.mark.parametrize("q", ["1.5", 2, 3])
def test_zeta2_expansion_agrees_with_series(q, ctx):
    base = QBase.of(q, ctx)
    for s1 in range(2, 7):
        for s2 in range(1, 7):
            assert agree(expansion.zeta2_q_expansion(s1, s2, base, ctx), series.zeta2_q(s1, s2, base, ctx)), (s1, s2)


@pytest.mark.parametrize("q", ["1.5", 2, 3])
def test_circ_expansion_agrees_with_series(q, ctx):
    base = QBase.of(q, ctx)
    for s1 in range(2, 7):
        for s2 in range(1, 7):
            assert agree(expansion.circ_expansion(s1, s2, base, ctx), series.circ_q(s1, s2, base, ctx)), (s1, s2)


def test_single_expansion(ctx):
    for q, s in [(2, 2), (3, 4), ("1.5", "2.5")]:
        base = QBase.of(q, ctx)
        assert agree(expansion.zeta_q_expansion_single(s, base, ctx), series.zeta_q(s, base, ctx))


def test_complex_expansion_agrees(ctx):
    base = QBase.of(2, ctx)
    assert agree(expansion.zeta2_q_expansion("3,0.5", "2,-1", base, ctx), series.zeta2_q("3,0.5", "2,-1", base, ctx))


def test_continuation_is_finite_outside_convergence(ctx):
    base = QBase.of(2, ctx)
    v = expansion.zeta2_q_expansion("-0.5", "0.25", base, ctx)
    assert gmpy2.is_finite(v.value) and v.abs_error_bound < mpfr("1e-20")


def test_expansion_poles(q2, ctx):
    with pytest.raises(DomainError):
        expansion.zeta2_q_expansion(1, 3, q2, ctx)
    with pytest.raises(DomainError):
        expansion.circ_expansion(1, 2, q2, ctx)
    with pytest.raises(DomainError):
        expansion.zeta_q_expansion_single(1, q2, ctx)


def test_pole_classify(q2, ctx):
    p = expansion.pole_classify(1, 5, q2, ctx)
    assert p.is_pole and p.family == "s1 = 1 + 2πib/log q, b=0"
    assert not expansion.pole_classify(3, 1, q2, ctx).is_pole
    with ctx.context():
        s1 = mpc(-2, 2 * gmpy2.const_pi() / q2.log_q)
    p = expansion.pole_classify(s1, 5, q2, ctx)
    assert p.is_pole and "a ≤ 0" in p.family


def test_zeta00_closed_at_q2():
    ctx = PrecisionCtx(128)
    base = QBase.of(2, ctx)
    with ctx.context():
        l2 = gmpy2.log(mpfr(2))
        a = mpfr(8) / 3 - 3 / (2 * l2)
        b = mpfr(8) / 3 - 3 / l2 + 1 / l2**2
        assert abs(expansion.zeta00_closed(base, "s2_first", ctx) - a) < mpfr("1e-35")
        assert abs(expansion.zeta00_closed(base, "s1_first", ctx) - b) < mpfr("1e-35")


def test_limits():
    ctx = PrecisionCtx(512)
    assert abs(expansion.limit_q_to_1("s2_first", 8, ctx) - mpfr(5) / 12) < mpfr("1e-8")
    assert abs(expansion.limit_q_to_1("s1_first", 8, ctx) - mpfr(1) / 3) < mpfr("1e-8")


def test_coarse_limits():
    ctx = PrecisionCtx(128)
    assert abs(expansion.limit_q_to_1("s2_first", 2, ctx) - mpfr(5) / 12) < mpfr("1e-2")
    t = expansion.limit_table("s2_first", 1, ctx)
    assert len(t.rows) == 2 and t.rows[0][0] == mpfr("1.0625")
    with pytest.raises(DomainError):
        expansion.limit_table("s2_first", 0, ctx)


def test_limit_convergence_is_monotone():
    ctx = PrecisionCtx(256)
    for order, ref in [("s2_first", Fraction(5, 12)), ("s1_first", Fraction(1, 3))]:
        errs = []
        for steps in range(4, 11):
            with gmpy2.context(precision=300):
                errs.append(abs(expansion.limit_q_to_1(order, steps, ctx) - gmpy2.mpq(ref.numerator, ref.denominator)))
        assert all(a > b for a, b in zip(errs, errs[1:])), errs


def test_asymptotic_ref():
    assert expansion.asymptotic_ref(0, "inv_xplus2", 1) == mpfr("0.5")
    v = expansion.asymptotic_ref("0.1", "inv_log1p", 3)
    with gmpy2.context(precision=128):
        ref = 1 / mpfr("0.1", 128) + mpfr(1) / 2 - mpfr("0.1", 128) / 12 + mpfr("0.01", 128) / 24
        assert abs(v - ref) < mpfr("1e-30")
    coeffs = dict(expansion.asymptotic_coefficients("inv_log1p_sq"))
    assert coeffs[0] == Fraction(1, 12)
    with pytest.raises(DomainError):
        expansion.asymptotic_ref("0.6", "inv_xplus2", 2)


def test_closed_form_matches_asymptotics_near_one():
    # h = q - 1 small: zeta00 ~ 5/12 + O(h)
    ctx = PrecisionCtx(256)
    base = QBase.of("1.0001", ctx)
    v = expansion.zeta00_closed(base, "s2_first", ctx)
    assert abs(v - mpfr(5) / 12) < mpfr("1e-3")


def test_iterated_limit_probe(q2, ctx):
    a = expansion.iterated_limit_probe(0, 0, q2, "1e-6", "1e-12", ctx, "s2_first")
    b = expansion.iterated_limit_probe(0, 0, q2, "1e-6", "1e-12", ctx, "s1_first")
    ca = expansion.zeta00_closed(q2, "s2_first", ctx)
    cb = expansion.zeta00_closed(q2, "s1_first", ctx)
    with ctx.context():
        assert abs(a.value - ca) < mpfr("1e-4")
        assert abs(b.value - cb) < mpfr("1e-4")
        assert abs((a.value - b.value) - (ca - cb)) < mpfr("1e-3")
        # the two orders genuinely differ; the gap is about 0.083 at q = 2
        assert abs(a.value - b.value) > mpfr("0.05")
    with pytest.raises(DomainError):
        expansion.iterated_limit_probe(0, 0, q2, "1e-4", "1e-6", ctx)
