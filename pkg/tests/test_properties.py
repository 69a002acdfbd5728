from fractions import Fraction

import gmpy2
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from qzeta import identities, kernels, series
from qzeta.qnum import PrecisionCtx, QBase, q_number, q_pow, rising_coeff
from qzeta.series import naive_oracle

CTX = PrecisionCtx(96)
qs = st.sampled_from(["1.25", "1.5", "2", "3", "4.5"])
reals = st.floats(min_value=-0.9, max_value=0.9).map(lambda x: Fraction(x).limit_denominator(10**6))


@settings(max_examples=40, deadline=None)
@given(q=qs, a=st.integers(min_value=0, max_value=40))
def test_q_number_integer_is_geometric_sum(q, a):
    base = QBase.of(q, CTX)
    with CTX.context():
        geometric = sum((base.q**j for j in range(a)), mpfr(0))
        assert abs(q_number(a, base, CTX) - geometric) <= geometric * CTX.unit_roundoff * 4 * (a + 1)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(min_value=-5, max_value=5), k=st.integers(min_value=1, max_value=25))
def test_rising_coeff_recurrence(s, k):
    with gmpy2.context(precision=CTX.working_bits):
        s = mpfr(s)
        lhs = rising_coeff(s, k, CTX.working_bits) * k
        prev = rising_coeff(s, k - 1, CTX.working_bits)
        rhs = prev * (s + k - 1)
        assert abs(lhs - rhs) <= abs(prev) * (abs(s) + k) * CTX.unit_roundoff * 4


@settings(max_examples=30, deadline=None)
@given(u=reals, v=reals, s=st.integers(1, 8), r=st.integers(1, 8))
def test_partial_fractions_exact(u, v, s, r):
    assert identities.partial_fraction_check(u, v, s, r) == 0


@settings(max_examples=15, deadline=None)
@given(q=qs, s=st.floats(min_value=1.3, max_value=6))
def test_zeta_q_tail_rigor(q, s):
    base = QBase.of(q, CTX)
    v = series.zeta_q(s, base, CTX)
    ref = naive_oracle("single", s, base=base, cutoff=4 * v.cutoff, prec_bits=CTX.working_bits + 32)
    with gmpy2.context(precision=256):
        assert abs(v.value - ref) <= v.abs_error_bound


@settings(max_examples=10, deadline=None)
@given(q=st.sampled_from(["1.5", "2", "3"]), s1=st.floats(min_value=2.2, max_value=5), s2=st.floats(min_value=1, max_value=3))
def test_double_tail_rigor(q, s1, s2):
    base = QBase.of(q, CTX)
    v = series.zeta2_q(s1, s2, base, CTX)
    ref = naive_oracle("double", s1, s2, base=base, cutoff=4 * v.cutoff, prec_bits=CTX.working_bits + 32)
    with gmpy2.context(precision=256):
        assert abs(v.value - ref) <= v.abs_error_bound


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=-1, max_value=1), min_size=2, max_size=20), st.booleans())
def test_triangle_backends_agree(xs, strict):
    with gmpy2.context(precision=80):
        a = [mpfr(0)] + [mpfr(x) for x in xs]
        b = [mpfr(0)] + [mpfr(x) * 3 for x in xs]
        ref = kernels.naive_triangle(a, b, strict, backend="python")
        if kernels.compiled_available():
            assert kernels.naive_triangle(a, b, strict, backend="mpfr-c") == ref
