import gmpy2
import mpmath
import pytest

from qzeta import PrecisionCtx, QBase


@pytest.fixture
def ctx():
    return PrecisionCtx(128)


@pytest.fixture
def ctx192():
    return PrecisionCtx(192)


@pytest.fixture
def q2(ctx):
    return QBase.of(2, ctx)


def mp_zeta_q(s, q, dps=60):
    """Independent oracle: sum q^n/[n]^s in mpmath, as a decimal string."""
    with mpmath.workdps(dps):
        q, s = mpmath.mpf(str(q)), mpmath.mpf(str(s))
        return mpmath.nstr(mpmath.nsum(lambda n: q**n / ((q**n - 1) / (q - 1)) ** s, [1, mpmath.inf]), dps)


def mp_double(s1, s2, q, e2=1, strict=True, dps=50, cutoff=None):
    """Double sum over k1 > k2 (>= if not strict) via mpmath with the inner
    sum done by nsum for every outer index."""
    with mpmath.workdps(dps):
        q = mpmath.mpf(q)

        def br(n):
            return (q**n - 1) / (q - 1)

        def inner(k2):
            start = k2 + 1 if strict else k2
            return mpmath.nsum(lambda k1: q**k1 / br(k1) ** s1, [start, mpmath.inf])

        total = mpmath.nsum(lambda k2: q ** (e2 * k2) / br(k2) ** s2 * inner(k2), [1, mpmath.inf])
        return mpmath.nstr(total, dps)


def close(a, b, tol):
    with gmpy2.context(precision=256):
        return abs(gmpy2.mpfr(a) - gmpy2.mpfr(b)) <= tol


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def log(line):
        print(line)
        lines.append(line)

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
