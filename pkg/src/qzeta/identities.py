"""Identity catalog and numerical verifier.

Each catalog entry turns integer parameters into a left-hand expression and
one or more right-hand expressions (chained displays ``A = B = C`` become
several links checked against the same left side).  Expressions are sums of
``(a + b (q-1)) * prod(terms)`` evaluated with rigorous error propagation,
so every report carries ``residual = |lhs - rhs|`` against
``tolerance = lhs.bound + rhs.bound``.

Several of the circ and Mordell-Tornheim formulas in their usual form do not
hold for ``q > 1``.  They are kept verbatim as the ``as_stated`` variant;
``derived_consistent`` is the reading obtained by re-deriving each formula
from the general one, and ``corrected`` adds the boundary term
``-(q-1) W(s)`` with ``W(s) = sum n q^n / [n]^s`` (and, for the
Mordell-Tornheim identity, front argument ``r - 1``) that makes them true.
"""

from __future__ import annotations

import enum
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import gmpy2
from gmpy2 import mpfr

from . import series
from .qnum import DomainError, PrecisionCtx, QBase, ValueWithError, to_number


class Variant(str, enum.Enum):
    AS_STATED = "as_stated"
    DERIVED_CONSISTENT = "derived_consistent"
    CORRECTED = "corrected"


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


_VERDICT_RANK = {Verdict.PASS: 0, Verdict.INCONCLUSIVE: 1, Verdict.FAIL: 2}


def classify(residual: mpfr, tolerance: mpfr) -> Verdict:
    """pass iff residual <= tol, fail iff residual > 10 tol, else inconclusive."""
    if residual <= tolerance:
        return Verdict.PASS
    if residual > 10 * tolerance:
        return Verdict.FAIL
    return Verdict.INCONCLUSIVE


# -- expressions -----------------------------------------------------------

# A term key names one evaluated series, e.g. ("zeta", 4) or ("zeta2", 2, 3).
Key = tuple
# coefficient a + b (q - 1)
Coef = tuple[int, int]


@dataclass(frozen=True)
class Expr:
    """``sum_j (a_j + b_j (q-1)) * prod(keys_j)``."""

    terms: tuple[tuple[Coef, tuple[Key, ...]], ...]

    def __add__(self, other: Expr) -> Expr:
        return Expr(self.terms + other.terms)

    def __sub__(self, other: Expr) -> Expr:
        return self + other.scaled(-1)

    def scaled(self, k: int) -> Expr:
        return Expr(tuple(((a * k, b * k), keys) for (a, b), keys in self.terms))

    def text(self) -> str:
        parts = []
        for (a, b), keys in self.terms:
            body = "*".join(_key_text(k) for k in keys) or "1"
            if b == 0:
                coef, sign = abs(a), "-" if a < 0 else "+"
                lead = "" if coef == 1 else f"{coef}*"
            elif a == 0:
                coef, sign = abs(b), "-" if b < 0 else "+"
                lead = "(q-1)*" if coef == 1 else f"{coef}*(q-1)*"
            else:
                sign, lead = "+", f"({a}{b:+d}*(q-1))*"
            parts.append(f"{sign} {lead}{body}")
        text = " ".join(parts) or "0"
        return text[2:] if text.startswith("+ ") else "-" + text[2:]


def term(*keys: Key, a: int = 1, b: int = 0) -> Expr:
    return Expr((((a, b), tuple(keys)),))


def qm1(*keys: Key, k: int = 1) -> Expr:
    return term(*keys, a=0, b=k)


ZERO = Expr(())


def Z(s):
    return ("zeta", s)


def Z2(a, b):
    return ("zeta2", a, b)


def Z2S(a, b):
    return ("zeta2_star", a, b)


def CIRC(a, b):
    return ("circ", a, b)


def CIRCS(a, b):
    return ("circ_star", a, b)


def MT(front: tuple, last):
    return ("mt", tuple(front), last)


def DIAG(s):
    return ("diag", s)


def W(s):
    return ("index_weighted", s)


def REIDX(a, b):
    return ("zeta2_reindexed", a, b)


_KEY_NAMES = {
    "zeta": "Z",
    "zeta2": "Z2",
    "zeta2_star": "Z2*",
    "circ": "Zc",
    "circ_star": "Zc*",
    "diag": "D",
    "index_weighted": "W",
    "zeta2_reindexed": "Z2r",
}


def _key_text(key: Key) -> str:
    if key[0] == "mt":
        front = ",".join(str(x) for x in key[1])
        return f"MT({front};{key[2]})"
    args = ",".join(str(x) for x in key[1:])
    return f"{_KEY_NAMES[key[0]]}({args})"


_EVALUATORS: dict[str, Callable] = {
    "zeta": series.zeta_q,
    "zeta2": series.zeta2_q,
    "zeta2_star": series.zeta2_star_q,
    "circ": series.circ_q,
    "circ_star": series.circ_star_q,
    "diag": series.diag_zeta_q,
    "index_weighted": series.index_weighted_zeta_q,
    "zeta2_reindexed": series.zeta2_q_reindexed,
}


class _Evaluator:
    """Evaluates expressions, caching each series value within one report."""

    def __init__(self, base: QBase, ctx: PrecisionCtx):
        self.base = base.at(ctx)
        self.ctx = ctx
        self.cache: dict[Key, ValueWithError] = {}

    def key(self, key: Key) -> ValueWithError:
        if key not in self.cache:
            if key[0] == "mt":
                self.cache[key] = series.mt_q(list(key[1]), key[2], self.base, self.ctx)
            else:
                self.cache[key] = _EVALUATORS[key[0]](*key[1:], self.base, self.ctx)
        return self.cache[key]

    def expr(self, e: Expr) -> ValueWithError:
        qm = self.base.q_minus_one
        total = ValueWithError.exact(mpfr(0))
        for (a, b), keys in e.terms:
            if a == 0 and b == 0:
                continue
            with gmpy2.context(precision=qm.precision + 64):
                coef = a + b * qm
            prod = ValueWithError.exact(coef)
            for k in keys:
                prod = prod * self.key(k)
            total = total + prod
        return total


# -- catalog ---------------------------------------------------------------


@dataclass(frozen=True)
class IdentitySpec:
    id: str
    anchor: str
    params: tuple[str, ...]
    variants: tuple[Variant, ...]
    constraints: str


@dataclass(frozen=True)
class Formula:
    lhs: Expr
    rhs: tuple[Expr, ...]


_A = (Variant.AS_STATED,)
_AC = (Variant.AS_STATED, Variant.CORRECTED)
_ADC = (Variant.AS_STATED, Variant.DERIVED_CONSISTENT, Variant.CORRECTED)

_CATALOG: tuple[IdentitySpec, ...] = (
    IdentitySpec(
        "nielsen_q",
        "Nielsen reflection for q > 1: Z(s)Z(s') = Z2(s,s') + Z2(s',s) + Z(s+s') + (q-1)Z(s+s'-1)",
        ("s", "sprime"), _A, "s, s' >= 2",
    ),
    IdentitySpec(
        "nielsen_q_star",
        "Nielsen reflection, star form: Z(s)Z(s') = Z2*(s,s') + Z2*(s',s) - Z(s+s') - (q-1)Z(s+s'-1)",
        ("s", "sprime"), _A, "s, s' >= 2",
    ),
    IdentitySpec(
        "star_reduction",
        "star decomposition: Z2*(s,s') = Z2(s,s') + Z(s+s') + (q-1)Z(s+s'-1)",
        ("s", "sprime"), _A, "s >= 2, s' >= 1, s + s' >= 3",
    ),
    IdentitySpec(
        "circ_star_reduction",
        "circ-star decomposition: Zc*(s,s') = Zc(s,s') + Z(s+s')",
        ("s", "sprime"), _A, "s >= 2, s' >= 0",
    ),
    IdentitySpec(
        "diag_reduction",
        "diagonal reduction: sum q^(2n)/[n]^s = Z(s) + (q-1)Z(s-1)",
        ("s",), _A, "s >= 3",
    ),
    IdentitySpec(
        "t2_31",
        "circ value at (3,1): Zc(3,1) = Z(4) - Z2(2,2) + (q-1)Z(3) = Z(2)^2 - 3 Z2(2,2)",
        (), _AC, "none",
    ),
    IdentitySpec(
        "t2_41",
        "circ value at (4,1): Zc(4,1) = Z(5) - Z2(2,3) - Z2(3,2) + (q-1)Z(4) = Z(2)Z(3) - 2Z2(2,3) - 2Z2(3,2)",
        (), _AC, "none",
    ),
    IdentitySpec(
        "t2_51",
        "circ value at (5,1): Zc(5,1) = Z(6) - Z2(3,3) - Z2(4,2) - Z2(2,4) + (q-1)Z(5)"
        " = Z(3)^2 - 3Z2(3,3) - Z2(4,2) - Z2(2,4) = Z(2)Z(4) - Z2(3,3) - 2Z2(4,2) - 2Z2(2,4)",
        (), _AC, "none",
    ),
    IdentitySpec(
        "t2_weight6",
        "weight-six relation: Z(3)^2 - 2Z2(3,3) = Z(2)Z(4) - Z2(2,4) - Z2(4,2)",
        (), _A, "none",
    ),
    IdentitySpec(
        "t3_general",
        "circ (s,1) general formula: Zc(s,1) = Z(s+1) - sum_{i=2}^{s-1} Z2(s+1-i,i) + (q-1)Z(s)",
        ("s",), _AC, "s >= 3",
    ),
    IdentitySpec(
        "t3_odd",
        "circ (s,1), odd s: Zc(s,1) = Z(r)Z(r') - 2Z2(r,r') - 2Z2(r',r) - sum_{i=2}^{s-1} Z2(s+1-i,i)",
        ("s", "r", "rprime"), _ADC, "s odd >= 3, r, r' >= 2, r + r' = s + 1",
    ),
    IdentitySpec(
        "t3_even",
        "circ (s,1), even s: Zc(s,1) = Z(t)Z(t') - 2Z2(t,t') - 2Z2(t',t) - sum_{i=2, i != t,t'}^{s-1} Z2(s+1-i,i)",
        ("s", "t", "tprime"), _ADC, "s even >= 4, t, t' >= 2, t + t' = s + 1",
    ),
    IdentitySpec(
        "p5_general",
        "circ-star (s,1) general formula: Zc*(s,1) = s Z(s+1) - sum_{i=2}^{s-1} Z2*(s+1-i,i) + (s-1)(q-1)Z(s)",
        ("s",), _AC, "s >= 3",
    ),
    IdentitySpec(
        "p5_odd",
        "circ-star (s,1), odd s: Zc*(s,1) = Z(r)Z(r') - 2Z2*(r,r') - 2Z2*(r',r) + (s+1)Z(s+1) + s(q-1)Z(s)"
        " - sum_{i=2}^{s-1} Z2*(s+1-i,i)",
        ("s", "r", "rprime"), _ADC, "s odd >= 3, r, r' >= 2, r + r' = s + 1",
    ),
    IdentitySpec(
        "p5_even",
        "circ-star (s,1), even s: Zc*(s,1) = Z(t)Z(t') - 2Z2*(t,t') - 2Z2*(t',t) + (s+1)Z(s+1) + s(q-1)Z(s)"
        " - sum_{i=2, i != t,t'}^{s-1} Z2(s+1-i,i)",
        ("s", "t", "tprime"), _ADC, "s even >= 4, t, t' >= 2, t + t' = s + 1",
    ),
    IdentitySpec(
        "t4_mt",
        "Mordell-Tornheim reduction: Z2(s,r) = Z(s)(Z(r) + (q-1)Z(r-1)) - sum_{j=0}^{s-1} MT(r, j+1; s-j)",
        ("s", "r"), _AC, "s >= 2, r >= 3",
    ),
    IdentitySpec(
        "pf_basic",
        "partial fractions: 1/((1-u)(1-uv)^s) = 1/((1-u)(1-v)^s) - sum_{i=0}^{s-1} v/((1-v)^(i+1)(1-uv)^(s-i))",
        ("u", "v", "s"), _A, "s >= 1, u != 1, v != 1, uv != 1",
    ),
    IdentitySpec(
        "pf_general",
        "generalised partial fractions: 1/((1-u)^r(1-uv)^s) = 1/((1-u)^r(1-v)^s)"
        " - sum_{i=0}^{s-1} v(1-u)^(1-r)/((1-v)^(i+1)(1-uv)^(s-i))",
        ("u", "v", "s", "r"), _A, "s, r >= 1, u != 1, v != 1, uv != 1",
    ),
    IdentitySpec(
        "reindex",
        "reindexing: Z2(s1,s2) = sum_{k1,k2 >= 1} q^(k1+k2) q^k2 / ([k1+k2]^s1 [k2]^s2)",
        ("s1", "s2"), _A, "s1 >= 2, s1 + s2 >= 3",
    ),
)

_BY_ID = {spec.id: spec for spec in _CATALOG}
IDENTITY_IDS = tuple(spec.id for spec in _CATALOG)
PARTIAL_FRACTION_IDS = ("pf_basic", "pf_general")


def catalog() -> tuple[IdentitySpec, ...]:
    """All catalog entries in a fixed order."""
    return _CATALOG


def get_spec(identity_id: str) -> IdentitySpec:
    try:
        return _BY_ID[identity_id]
    except KeyError:
        raise ValueError(f"unknown identity {identity_id!r}") from None


# -- formula builders ------------------------------------------------------


def _sum_z2(s: int, skip: Iterable[int] = (), star: bool = False) -> Expr:
    skip = set(skip)
    key = Z2S if star else Z2
    out = ZERO
    for i in range(2, s):
        if i not in skip:
            out = out + term(key(s + 1 - i, i))
    return out


def _t3_general(s: int) -> Expr:
    return term(Z(s + 1)) - _sum_z2(s) + qm1(Z(s))


def _p5_general(s: int) -> Expr:
    return term(Z(s + 1), a=s) - _sum_z2(s, star=True) + qm1(Z(s), k=s - 1)


def _boundary(s: int) -> Expr:
    return qm1(W(s), k=-1)


def _pair_stated(r: int, rp: int, star: bool) -> Expr:
    key = Z2S if star else Z2
    return term(Z(r), Z(rp)) - term(key(r, rp), a=2) - term(key(rp, r), a=2)


def _t3_derived(s: int, r: int, rp: int) -> Expr:
    if r == rp:
        return term(Z(r), Z(r)) - term(Z2(r, r), a=3) - _sum_z2(s, skip=(r,))
    return _pair_stated(r, rp, False) - _sum_z2(s, skip=(r, rp))


def _p5_derived(s: int, r: int, rp: int) -> Expr:
    return (
        term(Z2S(r, rp))
        + term(Z2S(rp, r))
        - term(Z(r), Z(rp))
        + term(Z(s + 1), a=s - 1)
        + qm1(Z(s), k=s - 2)
        - _sum_z2(s, star=True)
    )


def _p5_stated_head(s: int, r: int, rp: int) -> Expr:
    return _pair_stated(r, rp, True) + term(Z(s + 1), a=s + 1) + qm1(Z(s), k=s)


def _t2_chain(s: int) -> tuple[Expr, ...]:
    if s == 3:
        return (
            term(Z(4)) - term(Z2(2, 2)) + qm1(Z(3)),
            term(Z(2), Z(2)) - term(Z2(2, 2), a=3),
        )
    if s == 4:
        return (
            term(Z(5)) - term(Z2(2, 3)) - term(Z2(3, 2)) + qm1(Z(4)),
            term(Z(2), Z(3)) - term(Z2(2, 3), a=2) - term(Z2(3, 2), a=2),
        )
    return (
        term(Z(6)) - term(Z2(3, 3)) - term(Z2(4, 2)) - term(Z2(2, 4)) + qm1(Z(5)),
        term(Z(3), Z(3)) - term(Z2(3, 3), a=3) - term(Z2(4, 2)) - term(Z2(2, 4)),
        term(Z(2), Z(4)) - term(Z2(3, 3)) - term(Z2(4, 2), a=2) - term(Z2(2, 4), a=2),
    )


def _need(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


def _int_param(params: Mapping, name: str) -> int:
    if name not in params:
        raise ValueError(f"missing parameter {name!r}")
    v = params[name]
    if isinstance(v, str):
        v = v.strip()
        if not v.lstrip("-").isdigit():
            raise ValueError(f"parameter {name!r} must be an integer, got {v!r}")
    iv = int(v)
    if iv != v and not isinstance(v, str):
        raise ValueError(f"parameter {name!r} must be an integer, got {v!r}")
    return iv


def _check_pair(s: int, r: int, rp: int, odd: bool, label: str) -> None:
    if odd:
        _need(s >= 3 and s % 2 == 1, f"{label} needs odd s >= 3")
    else:
        _need(s >= 4 and s % 2 == 0, f"{label} needs even s >= 4")
    _need(r >= 2 and rp >= 2 and r + rp == s + 1, f"{label} needs r, r' >= 2 with r + r' = s + 1")


def formula(identity_id: str, params: Mapping, variant: Variant | str = Variant.AS_STATED) -> Formula:
    """Left and right expressions of a series identity for ``params``."""
    spec = get_spec(identity_id)
    variant = Variant(variant)
    if variant not in spec.variants:
        raise ValueError(f"{identity_id} has no {variant.value} variant; available: {[v.value for v in spec.variants]}")
    if identity_id in PARTIAL_FRACTION_IDS:
        raise ValueError("partial-fraction identities are checked with partial_fraction_check")
    p = {name: _int_param(params, name) for name in spec.params}
    corrected = variant is Variant.CORRECTED

    if identity_id in ("nielsen_q", "nielsen_q_star"):
        s, sp = p["s"], p["sprime"]
        _need(s >= 2 and sp >= 2, "Nielsen reflection needs s, s' >= 2")
        if identity_id == "nielsen_q":
            rhs = term(Z2(s, sp)) + term(Z2(sp, s)) + term(Z(s + sp)) + qm1(Z(s + sp - 1))
        else:
            rhs = term(Z2S(s, sp)) + term(Z2S(sp, s)) - term(Z(s + sp)) - qm1(Z(s + sp - 1))
        return Formula(term(Z(s), Z(sp)), (rhs,))
    if identity_id == "star_reduction":
        s, sp = p["s"], p["sprime"]
        _need(s >= 2 and sp >= 1 and s + sp >= 3, "star decomposition needs s >= 2, s' >= 1, s + s' >= 3")
        return Formula(term(Z2S(s, sp)), (term(Z2(s, sp)) + term(Z(s + sp)) + qm1(Z(s + sp - 1)),))
    if identity_id == "circ_star_reduction":
        s, sp = p["s"], p["sprime"]
        _need(s >= 2 and sp >= 0, "circ-star decomposition needs s >= 2, s' >= 0")
        return Formula(term(CIRCS(s, sp)), (term(CIRC(s, sp)) + term(Z(s + sp)),))
    if identity_id == "diag_reduction":
        s = p["s"]
        _need(s >= 3, "diagonal reduction needs s >= 3")
        return Formula(term(DIAG(s)), (term(Z(s)) + qm1(Z(s - 1)),))
    if identity_id in ("t2_31", "t2_41", "t2_51"):
        s = int(identity_id[3])
        chain = _t2_chain(s)
        if corrected:
            chain = tuple(e + _boundary(s) for e in chain)
        return Formula(term(CIRC(s, 1)), chain)
    if identity_id == "t2_weight6":
        return Formula(
            term(Z(3), Z(3)) - term(Z2(3, 3), a=2),
            (term(Z(2), Z(4)) - term(Z2(2, 4)) - term(Z2(4, 2)),),
        )
    if identity_id == "t3_general":
        s = p["s"]
        _need(s >= 3, "t3_general needs s >= 3")
        rhs = _t3_general(s) + (_boundary(s) if corrected else ZERO)
        return Formula(term(CIRC(s, 1)), (rhs,))
    if identity_id == "p5_general":
        s = p["s"]
        _need(s >= 3, "p5_general needs s >= 3")
        rhs = _p5_general(s) + (_boundary(s) if corrected else ZERO)
        return Formula(term(CIRCS(s, 1)), (rhs,))
    if identity_id in ("t3_odd", "t3_even"):
        odd = identity_id == "t3_odd"
        names = ("r", "rprime") if odd else ("t", "tprime")
        s, r, rp = p["s"], p[names[0]], p[names[1]]
        _check_pair(s, r, rp, odd, identity_id)
        if variant is Variant.AS_STATED:
            skip = () if odd else (r, rp)
            rhs = _pair_stated(r, rp, False) - _sum_z2(s, skip=skip)
        else:
            rhs = _t3_derived(s, r, rp) + (_boundary(s) if corrected else ZERO)
        return Formula(term(CIRC(s, 1)), (rhs,))
    if identity_id in ("p5_odd", "p5_even"):
        odd = identity_id == "p5_odd"
        names = ("r", "rprime") if odd else ("t", "tprime")
        s, r, rp = p["s"], p[names[0]], p[names[1]]
        _check_pair(s, r, rp, odd, identity_id)
        if variant is Variant.AS_STATED:
            tail = _sum_z2(s, star=True) if odd else _sum_z2(s, skip=(r, rp))
            rhs = _p5_stated_head(s, r, rp) - tail
        else:
            rhs = _p5_derived(s, r, rp) + (_boundary(s) if corrected else ZERO)
        return Formula(term(CIRCS(s, 1)), (rhs,))
    if identity_id == "t4_mt":
        s, r = p["s"], p["r"]
        _need(s >= 2 and r >= 3, "t4_mt needs s >= 2 and r >= 3")
        front = r - 1 if corrected else r
        rhs = term(Z(s), Z(r)) + qm1(Z(s), Z(r - 1))
        for j in range(s):
            rhs = rhs - term(MT((front, j + 1), s - j))
        return Formula(term(Z2(s, r)), (rhs,))
    if identity_id == "reindex":
        s1, s2 = p["s1"], p["s2"]
        _need(s1 >= 2 and s1 + s2 >= 3, "reindex needs s1 >= 2 and s1 + s2 >= 3")
        return Formula(term(Z2(s1, s2)), (term(REIDX(s1, s2)),))
    raise AssertionError(identity_id)  # pragma: no cover


# -- verification ----------------------------------------------------------


@dataclass(frozen=True)
class IdentityInstance:
    id: str
    params: Mapping = field(default_factory=dict)
    q: object = 2
    ctx: PrecisionCtx = field(default_factory=PrecisionCtx)
    variant: Variant = Variant.AS_STATED

    @property
    def base(self) -> QBase:
        return QBase.of(self.q, self.ctx)


@dataclass(frozen=True)
class Link:
    """One equality ``lhs = rhs_k`` of a (possibly chained) identity."""

    rhs_text: str
    rhs: ValueWithError
    residual: mpfr
    tolerance: mpfr
    verdict: Verdict


@dataclass(frozen=True)
class VerificationReport:
    instance: IdentityInstance
    lhs: ValueWithError | None
    rhs: ValueWithError | None
    residual: mpfr | Fraction | None
    tolerance: mpfr | Fraction | None
    verdict: Verdict
    elapsed: float
    lhs_text: str = ""
    rhs_text: str = ""
    links: tuple[Link, ...] = ()
    reason: str = ""


def _difference(a: ValueWithError, b: ValueWithError) -> tuple[mpfr, mpfr]:
    bits = max(_bits(a.value), _bits(b.value)) + 8
    with gmpy2.context(precision=bits):
        residual = abs(a.value - b.value)
        tolerance = a.abs_error_bound + b.abs_error_bound
    return residual, tolerance


def _bits(x) -> int:
    p = x.precision
    return p if isinstance(p, int) else p[0]


def _inconclusive(instance: IdentityInstance, start: float, reason: str) -> VerificationReport:
    return VerificationReport(
        instance, None, None, None, None, Verdict.INCONCLUSIVE, time.perf_counter() - start, reason=reason
    )


def verify(instance: IdentityInstance) -> VerificationReport:
    """Evaluate both sides of ``instance`` and classify the residual.

    Evaluator domain errors come back as an inconclusive report carrying the
    reason; invalid parameters or unknown variants raise.
    """
    start = time.perf_counter()
    if instance.id in PARTIAL_FRACTION_IDS:
        return _verify_partial_fraction(instance, start)
    f = formula(instance.id, instance.params, instance.variant)
    try:
        ev = _Evaluator(instance.base, instance.ctx)
        lhs = ev.expr(f.lhs)
        links = []
        for rhs_expr in f.rhs:
            rhs = ev.expr(rhs_expr)
            residual, tolerance = _difference(lhs, rhs)
            links.append(Link(rhs_expr.text(), rhs, residual, tolerance, classify(residual, tolerance)))
    except DomainError as exc:
        return _inconclusive(instance, start, str(exc))
    worst = max(links, key=lambda l: (_VERDICT_RANK[l.verdict], l.residual))
    return VerificationReport(
        instance,
        lhs,
        worst.rhs,
        worst.residual,
        worst.tolerance,
        worst.verdict,
        time.perf_counter() - start,
        f.lhs.text(),
        worst.rhs_text,
        tuple(links) if len(links) > 1 else (),
    )


def _verify_partial_fraction(instance: IdentityInstance, start: float) -> VerificationReport:
    p = instance.params
    r = _int_param(p, "r") if instance.id == "pf_general" else 1
    s = _int_param(p, "s")
    try:
        lhs, rhs = partial_fraction_sides(p["u"], p["v"], s, r, instance.ctx)
    except DomainError as exc:
        return _inconclusive(instance, start, str(exc))
    if isinstance(lhs, Fraction):
        residual, tolerance = abs(lhs - rhs), Fraction(0)
        verdict = Verdict.PASS if residual == 0 else Verdict.FAIL
        lv = ValueWithError.exact(_fraction_to_mpfr(lhs, instance.ctx))
        rv = ValueWithError.exact(_fraction_to_mpfr(rhs, instance.ctx))
    else:
        lv, rv = lhs, rhs
        residual, tolerance = _difference(lv, rv)
        verdict = classify(residual, tolerance)
    return VerificationReport(
        instance, lv, rv, residual, tolerance, verdict, time.perf_counter() - start,
        "1/((1-u)^r (1-uv)^s)", "1/((1-u)^r (1-v)^s) - sum_i v (1-u)^(1-r) / ((1-v)^(i+1) (1-uv)^(s-i))",
    )


def _fraction_to_mpfr(x: Fraction, ctx: PrecisionCtx) -> mpfr:
    with ctx.context():
        return mpfr(gmpy2.mpq(x.numerator, x.denominator))


# -- partial fractions -----------------------------------------------------


def _as_rational(x) -> Fraction | None:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, gmpy2.mpq().__class__):
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError:
            return None
    return None


def _pf_sides(u, v, s: int, r: int, one):
    if u == one or v == one or u * v == one:
        raise DomainError("partial fractions need u != 1, v != 1 and uv != 1")
    a, b, c = one - u, one - v, one - u * v
    lhs = one / (a**r * c**s)
    rhs = one / (a**r * b**s)
    lead = v * a ** (1 - r) if r != 1 else v
    for i in range(s):
        rhs -= lead / (b ** (i + 1) * c ** (s - i))
    return lhs, rhs


def partial_fraction_sides(u, v, s: int, r: int = 1, ctx: PrecisionCtx | None = None):
    """Both sides of the generalised partial-fraction identity.

    Rational inputs (ints, Fractions, floats, decimal strings) are evaluated
    exactly and return :class:`Fraction` values; ``mpfr`` inputs use the
    floating path and return :class:`ValueWithError` sides.
    """
    if s < 1 or r < 1:
        raise ValueError("partial fractions need s, r >= 1")
    ru, rv = _as_rational(u), _as_rational(v)
    if ru is not None and rv is not None:
        return _pf_sides(ru, rv, s, r, Fraction(1))
    ctx = ctx or PrecisionCtx()
    with ctx.context():
        fu, fv = to_number(u, ctx.working_bits), to_number(v, ctx.working_bits)
        lhs, rhs = _pf_sides(fu, fv, s, r, mpfr(1))
        # every operation is one rounding; the sums are short and well scaled
        ops = 6 * (s + r) + 8
        mag = abs(lhs) + sum(
            abs(v * (1 - fu) ** (1 - r) / ((1 - fv) ** (i + 1) * (1 - fu * fv) ** (s - i))) for i in range(s)
        ) + abs(1 / ((1 - fu) ** r * (1 - fv) ** s))
        err = mag * ops * ctx.unit_roundoff * 4
        return ValueWithError(lhs, err), ValueWithError(rhs, err)


def partial_fraction_check(u, v, s: int, r: int = 1, ctx: PrecisionCtx | None = None):
    """``|LHS - RHS|``: an exact :class:`Fraction` for rational input, else an
    ``mpfr`` residual."""
    lhs, rhs = partial_fraction_sides(u, v, s, r, ctx)
    if isinstance(lhs, Fraction):
        return abs(lhs - rhs)
    return _difference(lhs, rhs)[0]


def diag_reduction_check(s: int, base: QBase | object, ctx: PrecisionCtx | None = None) -> VerificationReport:
    """Direct ``sum q^(2n)/[n]^s`` against ``Z(s) + (q-1) Z(s-1)``."""
    ctx = ctx or PrecisionCtx()
    q = base.q if isinstance(base, QBase) else base
    return verify(IdentityInstance("diag_reduction", {"s": s}, q, ctx))


# -- suites ----------------------------------------------------------------


def _pairs(s: int) -> list[tuple[int, int]]:
    """Unordered pairs ``r <= r'`` with ``r, r' >= 2`` and ``r + r' = s + 1``."""
    return [(r, s + 1 - r) for r in range(2, (s + 1) // 2 + 1) if s + 1 - r >= r]


def expand_params(identity_id: str, ranges: Mapping[str, Sequence]) -> list[dict]:
    """Admissible parameter dicts for ``identity_id`` drawn from ``ranges``.

    Pair parameters of the parity identities are enumerated from ``s``
    rather than taken from ``ranges``.
    """
    spec = get_spec(identity_id)
    if not spec.params:
        return [{}]
    if identity_id in ("t3_odd", "p5_odd", "t3_even", "p5_even"):
        odd = identity_id.endswith("odd")
        names = ("r", "rprime") if odd else ("t", "tprime")
        out = []
        for s in ranges.get("s", ()):
            if s % 2 != (1 if odd else 0) or s < 3:
                continue
            for r, rp in _pairs(s):
                out.append({"s": s, names[0]: r, names[1]: rp})
        return out
    missing = [n for n in spec.params if n not in ranges]
    if missing:
        raise ValueError(f"{identity_id} needs ranges for {missing}")
    out = []
    for combo in itertools.product(*(ranges[n] for n in spec.params)):
        out.append(dict(zip(spec.params, combo)))
    return out


def _verify_star(instance: IdentityInstance) -> VerificationReport:
    return verify(instance)


def verify_suite(
    ids: Sequence[str],
    q_grid: Sequence,
    param_ranges: Mapping[str, Sequence] | None = None,
    ctx: PrecisionCtx | None = None,
    variant: Variant | str = Variant.AS_STATED,
    jobs: int = 1,
) -> list[VerificationReport]:
    """Verify every (id, q, params) combination, ordered by id, q, params.

    With ``jobs > 1`` instances run in worker processes; the output order is
    the same as for a serial run.
    """
    ctx = ctx or PrecisionCtx()
    if not q_grid:
        raise ValueError("q grid must be nonempty")
    variant = Variant(variant)
    instances = []
    for identity_id in ids:
        spec = get_spec(identity_id)
        v = variant if variant in spec.variants else Variant.AS_STATED
        for q in q_grid:
            for params in expand_params(identity_id, param_ranges or {}):
                instances.append(IdentityInstance(identity_id, params, q, ctx, v))
    if jobs > 1 and len(instances) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_verify_star, instances))
    return [verify(inst) for inst in instances]


# -- parity audit ----------------------------------------------------------


@dataclass(frozen=True)
class AuditRow:
    family: str
    s: int
    pair: tuple[int, int]
    variant: Variant
    report: VerificationReport
    prediction_text: str = ""
    predicted_residual: mpfr | None = None
    prediction_matches: bool | None = None


@dataclass(frozen=True)
class AuditReport:
    rows: tuple[AuditRow, ...]
    pair_counts: dict
    expected_counts: dict

    def counts_match(self) -> bool:
        return self.pair_counts == self.expected_counts


def _predictions(identity_id: str, s: int, r: int, rp: int) -> list[tuple[str, Expr]]:
    """Predicted ``rhs - lhs`` for the as-stated parity formulas.

    The first entry is the discrepancy obtained by comparing the as-stated
    formula with the general one; the second also accounts for the boundary
    term ``(q-1) W(s)`` that the general formula itself misses.
    """
    w = qm1(W(s))
    if identity_id.startswith("t3"):
        if identity_id == "t3_odd":
            base = term(Z2(r, rp), a=-1) - term(Z2(rp, r))
            return [("-(Z2(r,r') + Z2(r',r))", base), ("-(Z2(r,r') + Z2(r',r)) + (q-1)W(s)", base + w)]
        return [("0", ZERO), ("(q-1)W(s)", w)]
    head = term(Z(r), Z(rp), a=-1) - term(Z(s + 1)) - qm1(Z(s))
    if identity_id == "p5_even":
        head = term(Z(s + 1), a=s - 4) + qm1(Z(s), k=s - 4)
        return [("(s-4)(Z(s+1) + (q-1)Z(s))", head), ("(s-4)(Z(s+1) + (q-1)Z(s)) + (q-1)W(s)", head + w)]
    return [("-(Z(r)Z(r') + Z(s+1) + (q-1)Z(s))", head), ("-(Z(r)Z(r') + Z(s+1) + (q-1)Z(s)) + (q-1)W(s)", head + w)]


def audit_parity(
    s_min: int,
    s_max: int,
    base: QBase | object,
    ctx: PrecisionCtx | None = None,
    variants: Sequence[Variant | str] = (Variant.AS_STATED, Variant.DERIVED_CONSISTENT, Variant.CORRECTED),
) -> AuditReport:
    """Check every parity formula for ``s_min <= s <= s_max`` and every
    admissible pair, in each requested variant.

    As-stated rows also carry predicted signed discrepancies and whether the
    observed ``rhs - lhs`` matches them within tolerance.
    """
    ctx = ctx or PrecisionCtx()
    if s_min < 3:
        raise ValueError("parity audit needs s_min >= 3")
    q = base.q if isinstance(base, QBase) else base
    qb = QBase.of(q, ctx)
    rows = []
    pair_counts = {}
    expected = {}
    for s in range(s_min, s_max + 1):
        pairs = _pairs(s)
        pair_counts[s] = len(pairs)
        expected[s] = (s - 1) // 2 if s % 2 else (s - 2) // 2
        odd = s % 2 == 1
        for family in ("t3", "p5"):
            identity_id = f"{family}_{'odd' if odd else 'even'}"
            names = ("r", "rprime") if odd else ("t", "tprime")
            for r, rp in pairs:
                params = {"s": s, names[0]: r, names[1]: rp}
                for variant in variants:
                    variant = Variant(variant)
                    rep = verify(IdentityInstance(identity_id, params, q, ctx, variant))
                    if variant is not Variant.AS_STATED or rep.lhs is None:
                        rows.append(AuditRow(family, s, (r, rp), variant, rep))
                        continue
                    ev = _Evaluator(qb, ctx)
                    with gmpy2.context(precision=ctx.working_bits):
                        observed = ValueWithError(rep.rhs.value - rep.lhs.value, rep.tolerance)
                    for text, expr in _predictions(identity_id, s, r, rp):
                        pred = ev.expr(expr)
                        residual, tol = _difference(observed, pred)
                        rows.append(
                            AuditRow(family, s, (r, rp), variant, rep, text, pred.value, residual <= tol)
                        )
    return AuditReport(tuple(rows), pair_counts, expected)
