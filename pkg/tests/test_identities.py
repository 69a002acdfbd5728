import random
from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr

from qzeta import identities, series
from qzeta.identities import IdentityInstance, Variant, Verdict, classify, verify
from qzeta.qnum import PrecisionCtx, QBase, ValueWithError


def run(identity_id, params=None, q=2, bits=192, variant="as_stated"):
    return verify(IdentityInstance(identity_id, params or {}, q, PrecisionCtx(bits), Variant(variant)))


def test_catalog_shape():
    cat = identities.catalog()
    assert len(cat) == 19
    ids = [c.id for c in cat]
    assert len(set(ids)) == 19
    assert "nielsen_q" in ids and "t4_mt" in ids
    by = {c.id: c for c in cat}
    assert "Nielsen" in by["nielsen_q"].anchor
    assert "Mordell-Tornheim" in by["t4_mt"].anchor
    assert by["t4_mt"].params == ("s", "r")


def test_verdict_bands():
    assert classify(mpfr(1), mpfr(1)) is Verdict.PASS
    assert classify(mpfr(5), mpfr(1)) is Verdict.INCONCLUSIVE
    assert classify(mpfr(10), mpfr(1)) is Verdict.INCONCLUSIVE
    assert classify(mpfr(11), mpfr(1)) is Verdict.FAIL


def test_nielsen_example():
    r = run("nielsen_q", {"s": 2, "sprime": 2})
    assert r.verdict is Verdict.PASS and r.residual <= mpfr("1e-30")
    assert r.tolerance == r.lhs.abs_error_bound + r.rhs.abs_error_bound or r.residual <= r.tolerance


@pytest.mark.parametrize("identity_id", ["nielsen_q", "nielsen_q_star", "star_reduction"])
def test_two_parameter_families(identity_id):
    for s in (2, 4):
        for sp in (2, 5):
            assert run(identity_id, {"s": s, "sprime": sp}, q="1.5", bits=128).verdict is Verdict.PASS


def test_reductions():
    assert run("circ_star_reduction", {"s": 3, "sprime": 1}).verdict is Verdict.PASS
    for s, q in [(4, 2), (3, "1.5"), (6, 3)]:
        rep = identities.diag_reduction_check(s, QBase.of(q), PrecisionCtx(128))
        assert rep.verdict is Verdict.PASS


def test_reindex_grid():
    for q in ("1.5", 2):
        for s1 in range(2, 5):
            for s2 in range(1, 5):
                if s1 + s2 > 2:
                    assert run("reindex", {"s1": s1, "s2": s2}, q=q, bits=128).verdict is Verdict.PASS


def test_weight6_passes():
    for q in ("1.5", 2, 3):
        assert run("t2_weight6", q=q).verdict is Verdict.PASS


def test_t2_chains_as_stated_fail_by_boundary_term():
    # the as_stated circ(s,1) formulas miss -(q-1) * sum n q^n/[n]^s
    ctx = PrecisionCtx(192)
    base = QBase.of(2, ctx)
    for identity_id, s in [("t2_31", 3), ("t2_41", 4), ("t2_51", 5)]:
        rep = run(identity_id)
        assert rep.verdict is Verdict.FAIL
        assert len(rep.links) == (3 if s == 5 else 2)
        w = series.index_weighted_zeta_q(s, base, ctx)
        with gmpy2.context(precision=300):
            for link in rep.links:
                # rhs - lhs == (q-1) W(s)
                gap = link.rhs.value - rep.lhs.value
                assert abs(gap - w.value) <= link.tolerance + w.abs_error_bound
        fixed = run(identity_id, variant="corrected")
        assert fixed.verdict is Verdict.PASS and fixed.residual <= mpfr("1e-30")


def test_t2_31_residual_value():
    rep = run("t2_31")
    assert abs(float(rep.residual) - 2.3927452020406716) < 1e-12


def test_chain_consistency_with_general_formula():
    for identity_id, s in [("t2_31", 3), ("t2_41", 4), ("t2_51", 5)]:
        chain = run(identity_id)
        general = run("t3_general", {"s": s})
        assert chain.lhs.value == general.lhs.value
        first = chain.links[0]
        with gmpy2.context(precision=300):
            assert abs(first.rhs.value - general.rhs.value) <= first.rhs.abs_error_bound + general.rhs.abs_error_bound


def test_general_formulas_corrected_pass():
    for s in range(3, 10):
        assert run("t3_general", {"s": s}, bits=128, variant="corrected").verdict is Verdict.PASS
        assert run("p5_general", {"s": s}, bits=128, variant="corrected").verdict is Verdict.PASS
        assert run("t3_general", {"s": s}, bits=128).verdict is Verdict.FAIL


def test_t4_mt():
    for q in ("1.5", 2):
        for s in (2, 3):
            for r in (3, 4):
                assert run("t4_mt", {"s": s, "r": r}, q=q, bits=160).verdict is Verdict.FAIL
                fixed = run("t4_mt", {"s": s, "r": r}, q=q, bits=160, variant="corrected")
                assert fixed.verdict is Verdict.PASS and fixed.residual <= mpfr("1e-25")


def test_parameter_validation():
    with pytest.raises(ValueError):
        run("nielsen_q", {"s": 2})
    with pytest.raises(ValueError):
        run("nielsen_q", {"s": 2, "sprime": 2}, variant="corrected")
    with pytest.raises(ValueError):
        run("nope")
    # domain violations surface as inconclusive reports with a reason
    with pytest.raises(identities.DomainError):
        identities.formula("t3_odd", {"s": 5, "r": 2, "rprime": 3})


def test_evaluator_domain_error_is_inconclusive(monkeypatch):
    def boom(*a, **k):
        raise identities.DomainError("no convergence")

    monkeypatch.setitem(identities._EVALUATORS, "zeta", boom)
    rep = run("nielsen_q", {"s": 2, "sprime": 2}, bits=128)
    assert rep.verdict is Verdict.INCONCLUSIVE and "no convergence" in rep.reason


def test_pf_examples():
    assert identities.partial_fraction_check(0, "0.5", 3, 1) == 0
    assert identities.partial_fraction_check("0.4", 0, 6, 2) == 0
    assert identities.partial_fraction_check(Fraction(1, 3), Fraction(1, 2), 4, 3) == 0
    lhs, rhs = identities.partial_fraction_sides(0, "0.37", 5)
    assert lhs == rhs == 1
    rep = run("pf_basic", {"u": 0, "v": "0.37", "s": 5})
    assert rep.verdict is Verdict.PASS and rep.residual == 0
    with pytest.raises(identities.DomainError):
        identities.partial_fraction_check(1, "0.5", 2)
    with pytest.raises(identities.DomainError):
        identities.partial_fraction_check(2, "0.5", 2)


def test_pf_float_path():
    ctx = PrecisionCtx(128)
    with gmpy2.context(precision=144):
        u, v = gmpy2.sqrt(mpfr(2)) / 3, gmpy2.const_pi() / 7
    res = identities.partial_fraction_check(u, v, 5, 3, ctx)
    assert res < mpfr("1e-35")


def test_pf_random_rationals():
    rng = random.Random(5)
    for _ in range(200):
        u = Fraction(rng.randint(-899, 899), 1000)
        v = Fraction(rng.randint(-899, 899), 1000)
        assert identities.partial_fraction_check(u, v, rng.randint(1, 8), rng.randint(1, 8)) == 0


def test_suite_ordering_and_counts():
    ctx = PrecisionCtx(128)
    ids = ["t2_31", "t2_41", "t2_51", "t2_weight6"]
    reps = identities.verify_suite(ids, ["1.5", 2, 3], ctx=ctx, variant="corrected")
    assert len(reps) == 12
    assert [r.instance.id for r in reps] == [i for i in ids for _ in range(3)]
    assert all(r.verdict is Verdict.PASS for r in reps)
    assert identities.verify_suite([], [2], ctx=ctx) == []
    with pytest.raises(ValueError):
        identities.verify_suite(ids, [], ctx=ctx)


def test_suite_parallel_matches_serial():
    ctx = PrecisionCtx(96)
    serial = identities.verify_suite(["nielsen_q"], [2], {"s": [2, 3], "sprime": [2, 3]}, ctx)
    parallel = identities.verify_suite(["nielsen_q"], [2], {"s": [2, 3], "sprime": [2, 3]}, ctx, jobs=2)
    assert [r.instance.params for r in serial] == [r.instance.params for r in parallel]
    assert [r.residual for r in serial] == [r.residual for r in parallel]


def test_audit_parity():
    audit = identities.audit_parity(3, 9, 2, PrecisionCtx(128))
    assert audit.counts_match()
    assert audit.pair_counts == {3: 1, 4: 1, 5: 2, 6: 2, 7: 3, 8: 3, 9: 4}
    rows = audit.rows
    for row in rows:
        if row.variant is Variant.CORRECTED:
            assert row.report.verdict is Verdict.PASS, (row.family, row.s, row.pair)
        if row.prediction_text.endswith("(q-1)W(s)"):
            assert row.prediction_matches, (row.family, row.s, row.pair)
    # the plain pre-registered amounts miss the boundary term
    e7 = [r for r in rows if r.family == "t3" and r.s == 5 and r.pair == (2, 4) and r.prediction_text == "-(Z2(r,r') + Z2(r',r))"]
    assert len(e7) == 1 and e7[0].prediction_matches is False


def test_scaling_sanity():
    for identity_id, params, variant in [
        ("nielsen_q", {"s": 3, "sprime": 2}, "as_stated"),
        ("t2_31", {}, "corrected"),
        ("star_reduction", {"s": 2, "sprime": 2}, "as_stated"),
    ]:
        lo = run(identity_id, params, bits=96, variant=variant)
        hi = run(identity_id, params, bits=192, variant=variant)
        assert lo.verdict is Verdict.PASS and hi.verdict is Verdict.PASS


def test_expression_text():
    f = identities.formula("t3_general", {"s": 4})
    assert f.lhs.text() == "Zc(4,1)"
    assert f.rhs[0].text() == "Z(5) - Z2(3,2) - Z2(2,3) + (q-1)*Z(4)"
