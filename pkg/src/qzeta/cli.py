"""Command-line front end.

    qzeta eval zeta --s 2 --q 2
    qzeta verify --id nielsen_q --s 2 --sprime 3 --q 2
    qzeta suite --ids t2_31,t2_41 --q 1.5,2,3
    qzeta audit --s-max 9 --q 2
    qzeta limits --order s2_first --steps 8 --prec-bits 512
    qzeta sweep zeta2 --grid s1=2,3,4 --grid s2=1,2 --q 1.5,2

Exit codes: 0 no failures, 1 at least one fail verdict, 2 configuration or
domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from decimal import ROUND_CEILING, Decimal
from fractions import Fraction
from typing import Any, Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from . import expansion, identities, series
from .qnum import DomainError, PrecisionCtx, QBase, ValueWithError, to_number

SCHEMA_VERSION = "1"
PREC_ENV = "QZETA_PREC_BITS"
MAX_SWEEP_POINTS = 100_000

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

FUNCTIONS = {
    "zeta": (series.zeta_q, ("s",)),
    "zeta2": (series.zeta2_q, ("s1", "s2")),
    "zeta2star": (series.zeta2_star_q, ("s1", "s2")),
    "circ": (series.circ_q, ("s1", "s2")),
    "circstar": (series.circ_star_q, ("s1", "s2")),
    "mt": (series.mt_q, ("s", "slast")),
}

_PARAM_FLAGS = ("s", "sprime", "s1", "s2", "slast", "r", "rprime", "t", "tprime", "u", "v")


class ConfigError(Exception):
    """Bad invocation; reported on stderr with exit code 2."""


# -- formatting ------------------------------------------------------------


def digits_for(bits: int) -> int:
    """Certified decimal digits reported at ``bits`` of mantissa."""
    return max(1, math.ceil(bits * 0.301) - 5)


def _real_text(x: mpfr, digits: int) -> str:
    if x == 0:
        return "0"
    if not gmpy2.is_finite(x):
        return str(x)
    mant, exp, _ = x.digits(10, digits)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+d}"


def decimal_text(x, digits: int) -> str:
    """Decimal text with ``digits`` significant digits; complex as ``re,im``."""
    if isinstance(x, Fraction):
        x = mpfr(gmpy2.mpq(x.numerator, x.denominator), max(64, int(digits * 3.33) + 16))
    if isinstance(x, mpc):
        return f"{_real_text(x.real, digits)},{_real_text(x.imag, digits)}"
    return _real_text(mpfr(x) if not isinstance(x, mpfr) else x, digits)


def bound_text(x) -> str:
    """Short decimal text of an error bound, rounded upward."""
    if x is None:
        return ""
    if isinstance(x, Fraction):
        x = mpfr(gmpy2.mpq(x.numerator, x.denominator))
    if x == 0:
        return "0"
    f = math.nextafter(float(x), math.inf)
    if f == math.inf:
        return _real_text(x, 17)
    d = Decimal(f)
    q = Decimal(1).scaleb(d.adjusted() - 5)
    return f"{d.quantize(q, rounding=ROUND_CEILING):.5e}"


def residual_text(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x) if x == 0 else decimal_text(x, 20)
    return _real_text(x, 20)


# -- parsing ---------------------------------------------------------------


def parse_q(text: str, bits: int) -> mpfr:
    try:
        q = to_number(str(text), bits)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse q = {text!r}") from exc
    if isinstance(q, mpc) or not gmpy2.is_finite(q) or not q > 1:
        raise ConfigError(f"q must be a real number > 1, got {text!r}")
    return q


def parse_q_list(text, bits: int) -> list[str]:
    items = _split_list(text)
    if not items:
        raise ConfigError("--q needs at least one value")
    for item in items:
        parse_q(item, bits)
    return items


def _split_list(text) -> list[str]:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    return [t.strip() for t in str(text).split(",") if t.strip()]


def parse_s(text, bits: int):
    """``"re"`` or ``"re,im"`` at ``bits`` with correct rounding."""
    try:
        return to_number(str(text), bits)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse s = {text!r}") from exc


def parse_int_range(text: str) -> list[int]:
    """``"2,3,4"`` or ``"3..6"`` (inclusive)."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in _split_list(text)]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer range {text!r}") from exc


def parse_grid_values(text: str) -> list[str]:
    text = str(text).strip()
    if ".." in text:
        return [str(v) for v in parse_int_range(text)]
    return _split_list(text)


# -- records ---------------------------------------------------------------


def _ms(seconds: float) -> float:
    return round(seconds * 1000.0, 3)


def _vwe_fields(prefix: str, v: ValueWithError | None, digits: int) -> dict:
    if v is None:
        return {prefix: "", f"{prefix}_abs_error_bound": ""}
    return {prefix: decimal_text(v.value, digits), f"{prefix}_abs_error_bound": bound_text(v.abs_error_bound)}


def eval_record(function: str, params: dict, q: str, ctx: PrecisionCtx) -> dict:
    fn, names = FUNCTIONS[function]
    digits = digits_for(ctx.mantissa_bits)
    rec = {
        "function": function,
        "params": {k: params[k] for k in names},
        "q": q,
        "precision_bits": ctx.mantissa_bits,
        "digits": digits,
    }
    start = time.perf_counter()
    try:
        base = QBase.of(parse_q(q, ctx.working_bits), ctx)
        if function == "mt":
            front = [parse_s(t, ctx.working_bits) for t in _split_front(params["s"])]
            val = fn(front, parse_s(params["slast"], ctx.working_bits), base, ctx)
        else:
            val = fn(*(parse_s(params[k], ctx.working_bits) for k in names), base, ctx)
    except DomainError as exc:
        rec.update(value="", abs_error_bound="", terms_used=0, status="domain_error", reason=str(exc))
        rec["elapsed_ms"] = _ms(time.perf_counter() - start)
        return rec
    rec.update(
        value=decimal_text(val.value, digits),
        abs_error_bound=bound_text(val.abs_error_bound),
        terms_used=val.terms_used,
        status=val.status.value,
        reason="",
        elapsed_ms=_ms(time.perf_counter() - start),
    )
    return rec


def _split_front(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    return [t for t in str(text).replace(";", ",").split(",") if t.strip()]


def report_record(rep: identities.VerificationReport, tol_override=None) -> dict:
    inst = rep.instance
    digits = digits_for(inst.ctx.mantissa_bits)
    tolerance, verdict = rep.tolerance, rep.verdict
    if tol_override is not None and rep.residual is not None:
        tolerance = tol_override
        verdict = identities.classify(rep.residual, tolerance)
    rec = {
        "identity_id": inst.id,
        "params": {k: str(v) for k, v in inst.params.items()},
        "q": str(inst.q),
        "precision_bits": inst.ctx.mantissa_bits,
        "digits": digits,
        "variant": inst.variant.value,
        **_vwe_fields("lhs", rep.lhs, digits),
        **_vwe_fields("rhs", rep.rhs, digits),
        "residual": residual_text(rep.residual),
        "tolerance": residual_text(tolerance),
        "verdict": verdict.value,
        "lhs_formula": rep.lhs_text,
        "rhs_formula": rep.rhs_text,
        "reason": rep.reason,
        "elapsed_ms": _ms(rep.elapsed),
    }
    if rep.links:
        rec["links"] = [
            {
                "rhs_formula": l.rhs_text,
                "rhs": decimal_text(l.rhs.value, digits),
                "residual": residual_text(l.residual),
                "tolerance": residual_text(l.tolerance),
                "verdict": l.verdict.value,
            }
            for l in rep.links
        ]
    return rec


def summarize(records: Sequence[dict]) -> dict:
    counts = {"pass": 0, "fail": 0, "inconclusive": 0}
    for rec in records:
        v = rec.get("verdict")
        if v in counts:
            counts[v] += 1
    return counts


# -- commands --------------------------------------------------------------


def _ctx(args) -> PrecisionCtx:
    bits = args.prec_bits
    if bits is None:
        env = os.environ.get(PREC_ENV)
        bits = int(env) if env else 128
    guard = args.guard_bits if args.guard_bits is not None else 16
    try:
        return PrecisionCtx(int(bits), int(guard))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _tol(args, ctx: PrecisionCtx):
    if args.tol is None:
        return None
    try:
        t = to_number(str(args.tol), ctx.working_bits)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse --tol {args.tol!r}") from exc
    if isinstance(t, mpc) or not t >= 0:
        raise ConfigError("--tol must be a nonnegative real")
    return t


def _single_q(args, ctx) -> str:
    qs = parse_q_list(args.q if args.q is not None else "2", ctx.working_bits)
    if len(qs) != 1:
        raise ConfigError("this command takes a single --q value")
    return qs[0]


def cmd_eval(args) -> tuple[list[dict], int]:
    ctx = _ctx(args)
    function = args.function
    if function not in FUNCTIONS:
        raise ConfigError(f"unknown function {function!r}; choose from {sorted(FUNCTIONS)}")
    names = FUNCTIONS[function][1]
    params = {}
    for name in names:
        value = getattr(args, name, None)
        if value is None:
            raise ConfigError(f"eval {function} needs --{name}")
        params[name] = str(value)
    for name in names:
        if name != "s" or function != "mt":
            parse_s(params[name], ctx.working_bits)
    rec = eval_record(function, params, _single_q(args, ctx), ctx)
    return [rec], EXIT_ERROR if rec["status"] == "domain_error" else EXIT_OK


def _identity_params(args, identity_id: str) -> dict:
    spec = identities.get_spec(identity_id)
    params = {}
    for name in spec.params:
        value = getattr(args, name, None)
        if value is None:
            raise ConfigError(f"{identity_id} needs --{name}")
        params[name] = str(value)
    return params


def _variant(args) -> identities.Variant:
    try:
        return identities.Variant(args.variant or "as_stated")
    except ValueError:
        raise ConfigError(f"unknown variant {args.variant!r}") from None


def _exit_for(records) -> int:
    if any(r.get("status") == "domain_error" for r in records):
        return EXIT_ERROR
    return EXIT_FAIL if summarize(records)["fail"] else EXIT_OK


def cmd_verify(args) -> tuple[list[dict], int]:
    ctx = _ctx(args)
    identity_id = args.id
    if identity_id not in identities.IDENTITY_IDS:
        raise ConfigError(f"unknown identity {identity_id!r}")
    variant = _variant(args)
    if variant not in identities.get_spec(identity_id).variants:
        raise ConfigError(f"{identity_id} has no {variant.value} variant")
    params = _identity_params(args, identity_id)
    q = _single_q(args, ctx)
    try:
        rep = identities.verify(identities.IdentityInstance(identity_id, params, q, ctx, variant))
    except (ValueError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    rec = report_record(rep, _tol(args, ctx))
    if rep.residual is None:
        rec["status"] = "domain_error"
    return [rec], _exit_for([rec])


def cmd_suite(args) -> tuple[list[dict], int]:
    ctx = _ctx(args)
    ids = _split_list(args.ids) or list(identities.IDENTITY_IDS)
    unknown = [i for i in ids if i not in identities.IDENTITY_IDS]
    if unknown:
        raise ConfigError(f"unknown identities {unknown}")
    qs = parse_q_list(args.q if args.q is not None else "2", ctx.working_bits)
    s_min = args.s_min if args.s_min is not None else 2
    s_max = args.s_max if args.s_max is not None else 6
    s_range = list(range(int(s_min), int(s_max) + 1))
    ranges: dict[str, list] = {
        "s": s_range,
        "sprime": s_range,
        "s1": s_range,
        "s2": list(range(1, int(s_max) + 1)),
        "r": [x for x in s_range if x >= 3],
        "u": [args.u if args.u is not None else "0"],
        "v": [args.v if args.v is not None else "1/2"],
    }
    # keep only admissible instances for each identity
    filtered = {}
    for identity_id in ids:
        spec = identities.get_spec(identity_id)
        if identity_id in identities.PARTIAL_FRACTION_IDS:
            continue
        filtered[identity_id] = [
            p for p in identities.expand_params(identity_id, ranges) if _admissible(identity_id, p)
        ]
        if spec.params and not filtered[identity_id]:
            raise ConfigError(f"no admissible parameters for {identity_id} in s = {s_min}..{s_max}")
    variant = _variant(args)
    jobs = int(args.jobs or 1)
    tol = _tol(args, ctx)
    instances = []
    for identity_id in ids:
        spec = identities.get_spec(identity_id)
        v = variant if variant in spec.variants else identities.Variant.AS_STATED
        if identity_id in identities.PARTIAL_FRACTION_IDS:
            plist = [p for p in identities.expand_params(identity_id, ranges)]
        else:
            plist = filtered[identity_id]
        for q in qs:
            for p in plist:
                instances.append(identities.IdentityInstance(identity_id, p, q, ctx, v))
    reports = _run_parallel(identities.verify, instances, jobs)
    records = [report_record(r, tol) for r in reports]
    return records, _exit_for(records)


def _admissible(identity_id: str, p: dict) -> bool:
    try:
        identities.formula(identity_id, p)
        return True
    except DomainError:
        return False


def _run_parallel(fn, items: list, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_audit(args) -> tuple[list[dict], int]:
    ctx = _ctx(args)
    q = _single_q(args, ctx)
    s_min = int(args.s_min if args.s_min is not None else 3)
    s_max = int(args.s_max if args.s_max is not None else 9)
    if s_min < 3 or s_max < s_min:
        raise ConfigError("audit needs 3 <= s-min <= s-max")
    audit = identities.audit_parity(s_min, s_max, q, ctx)
    tol = _tol(args, ctx)
    digits = digits_for(ctx.mantissa_bits)
    records = []
    for row in audit.rows:
        rec = report_record(row.report, tol)
        rec["family"] = row.family
        rec["s"] = row.s
        rec["pair"] = list(row.pair)
        if row.prediction_text:
            rec["prediction"] = row.prediction_text
            rec["predicted_residual"] = decimal_text(row.predicted_residual, digits)
            rec["prediction_matches"] = bool(row.prediction_matches)
        records.append(rec)
    records.append(
        {
            "pair_counts": {str(k): v for k, v in audit.pair_counts.items()},
            "expected_pair_counts": {str(k): v for k, v in audit.expected_counts.items()},
            "pair_counts_match": audit.counts_match(),
        }
    )
    return records, _exit_for(records)


_LIMIT_REFERENCE = {"s2_first": Fraction(5, 12), "s1_first": Fraction(1, 3)}


def cmd_limits(args) -> tuple[list[dict], int]:
    ctx = _ctx(args)
    order = args.order or "s2_first"
    if order not in _LIMIT_REFERENCE:
        raise ConfigError(f"unknown order {order!r}")
    steps = int(args.steps if args.steps is not None else 8)
    start = time.perf_counter()
    try:
        table = expansion.limit_table(order, steps, ctx)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    digits = digits_for(ctx.mantissa_bits)
    records = [
        {"order": order, "q": decimal_text(q, digits), "value": decimal_text(v, digits), "row": "closed_form"}
        for q, v in table.rows
    ]
    ref = _LIMIT_REFERENCE[order]
    with gmpy2.context(precision=ctx.working_bits):
        diff = abs(table.limit - gmpy2.mpq(ref.numerator, ref.denominator))
    records.append(
        {
            "order": order,
            "row": "limit",
            "steps": steps,
            "precision_bits": ctx.mantissa_bits,
            "value": decimal_text(table.limit, digits),
            "error_estimate": bound_text(table.error_estimate),
            "reference": str(ref),
            "distance_to_reference": bound_text(diff),
            "elapsed_ms": _ms(time.perf_counter() - start),
        }
    )
    return records, EXIT_OK


def _sweep_names(function: str, grid: dict) -> list[str]:
    if function == "mt":
        front = sorted(k for k in grid if k.startswith("s") and k[1:].isdigit())
        if not front or "slast" not in grid:
            raise ConfigError("sweep mt needs --grid s1=... [--grid s2=...] and --grid slast=...")
        return front + ["slast"]
    return list(FUNCTIONS[function][1])


def _sweep_cell(cell) -> dict:
    function, params, q, bits, guard = cell
    ctx = PrecisionCtx(bits, guard)
    if function == "mt":
        front = [params[k] for k in params if k != "slast"]
        rec = eval_record("mt", {"s": front, "slast": params["slast"]}, q, ctx)
        rec["params"] = dict(params)
    else:
        rec = eval_record(function, params, q, ctx)
    return rec


def cmd_sweep(args) -> tuple[list[dict], int]:
    ctx = _ctx(args)
    function = args.function
    if function not in FUNCTIONS:
        raise ConfigError(f"unknown function {function!r}; choose from {sorted(FUNCTIONS)}")
    grid: dict[str, list[str]] = {}
    for item in args.grid or []:
        if "=" not in item:
            raise ConfigError(f"grid entries look like name=values, got {item!r}")
        name, values = item.split("=", 1)
        grid[name.strip()] = parse_grid_values(values)
    names = _sweep_names(function, grid)
    for name in names:
        if name not in grid:
            value = getattr(args, name, None)
            if value is None:
                raise ConfigError(f"sweep {function} needs a value or grid for {name}")
            grid[name] = [str(value)]
    extra = set(grid) - set(names)
    if extra:
        raise ConfigError(f"grid names {sorted(extra)} are not parameters of {function}")
    qs = parse_q_list(args.q if args.q is not None else "2", ctx.working_bits)
    axes = [sorted(grid[n], key=_sort_key) for n in names] + [sorted(qs, key=_sort_key)]
    total = math.prod(len(a) for a in axes)
    if total > MAX_SWEEP_POINTS:
        raise ConfigError(f"sweep has {total} points; the limit is {MAX_SWEEP_POINTS}")
    for axis, name in zip(axes, names):
        for value in axis:
            parse_s(value, ctx.working_bits)
    cells = [
        (function, dict(zip(names, combo[:-1])), combo[-1], ctx.mantissa_bits, ctx.guard_bits)
        for combo in itertools.product(*axes)
    ]
    records = _run_parallel(_sweep_cell, cells, int(args.jobs or 1))
    return records, _exit_for(records)


def _sort_key(text: str):
    try:
        v = to_number(text, 128)
        return (0, float(v.real), float(v.imag)) if isinstance(v, mpc) else (0, float(v), 0.0)
    except (ValueError, TypeError):
        return (1, text, 0.0)


COMMANDS = {
    "eval": cmd_eval,
    "verify": cmd_verify,
    "suite": cmd_suite,
    "audit": cmd_audit,
    "limits": cmd_limits,
    "sweep": cmd_sweep,
}


# -- output ----------------------------------------------------------------


def _flatten(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        if k == "params" and isinstance(v, dict):
            for pk, pv in v.items():
                out[pk] = ",".join(map(str, pv)) if isinstance(pv, (list, tuple)) else pv
        elif isinstance(v, (list, dict)):
            out[k] = json.dumps(v, sort_keys=True)
        else:
            out[k] = v
    return out


def render(records: list[dict], fmt: str, invocation: list[str], command: str) -> str:
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "invocation": invocation,
            "command": command,
            "records": records,
            "summary": summarize(records),
        }
        return json.dumps(doc, indent=2) + "\n"
    rows = [_flatten(r) for r in records]
    columns: list[str] = []
    for row in rows:
        for k in row:
            if k not in columns:
                columns.append(k)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        return buf.getvalue()
    lines = []
    for row in rows:
        lines.append("  ".join(f"{k}={v}" for k, v in row.items() if v not in ("", None)))
    if any("verdict" in r for r in records):
        c = summarize(records)
        lines.append(f"summary: pass={c['pass']} fail={c['fail']} inconclusive={c['inconclusive']}")
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qzeta-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- argument parsing ------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--q", help="q > 1, decimal text; comma-separated list for suite/sweep")
    g.add_argument("--prec-bits", type=int, help=f"mantissa bits (default ${PREC_ENV} or 128)")
    g.add_argument("--guard-bits", type=int, help="guard bits (default 16)")
    g.add_argument("--tol", help="tolerance override for verdicts")
    g.add_argument("--output", help="write the report here (atomically) instead of stdout")
    g.add_argument("--format", choices=("json", "csv", "plain"), help="report format (default json)")
    g.add_argument("--config", help="JSON file of option values; explicit flags win")
    g.add_argument("--jobs", type=int, help="worker processes for suite/sweep")


def _params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("parameters")
    for name in _PARAM_FLAGS:
        g.add_argument(f"--{name}", help=f"value of {name} (decimal text; complex as re,im)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qzeta", description="q-zeta values for q > 1 and identity checks.")
    _common(parser)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("eval", help="evaluate one function")
    p.add_argument("function", nargs="?", help=f"one of {', '.join(FUNCTIONS)}")
    _common(p)
    _params(p)

    p = sub.add_parser("verify", help="verify one identity instance")
    p.add_argument("--id", help="identity id")
    p.add_argument("--variant", help="as_stated, derived_consistent or corrected")
    _common(p)
    _params(p)

    p = sub.add_parser("suite", help="verify identities over q and s ranges")
    p.add_argument("--ids", help="comma-separated identity ids (default: all)")
    p.add_argument("--variant")
    p.add_argument("--s-min", type=int)
    p.add_argument("--s-max", type=int)
    _common(p)
    _params(p)

    p = sub.add_parser("audit", help="parity-formula audit")
    p.add_argument("--s-min", type=int)
    p.add_argument("--s-max", type=int)
    _common(p)

    p = sub.add_parser("limits", help="q -> 1 limits of the (0,0) values")
    p.add_argument("--order", help="s2_first or s1_first")
    p.add_argument("--steps", type=int)
    _common(p)

    p = sub.add_parser("sweep", help="evaluate a function on a grid (CSV)")
    p.add_argument("function", nargs="?")
    p.add_argument("--grid", action="append", help="name=v1,v2,... or name=a..b; repeatable")
    _common(p)
    _params(p)
    return parser


_CONFIG_KEYS = {
    "function", "id", "ids", "variant", "s_min", "s_max", "order", "steps", "grid",
    "q", "prec_bits", "guard_bits", "tol", "output", "format", "jobs", *_PARAM_FLAGS,
}
_CONFIG_ALIASES = {"precision_bits": "prec_bits", "selector": None}


def _apply_config(args: argparse.Namespace) -> None:
    if not args.config:
        return
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg = dict(cfg)
    command = cfg.pop("command", None)
    if args.command is None:
        args.command = command
    elif command is not None and command != args.command:
        raise ConfigError(f"config command {command!r} conflicts with {args.command!r}")
    selector = cfg.pop("selector", None)
    if selector is not None:
        key = "id" if args.command == "verify" else "ids" if args.command == "suite" else "function"
        cfg.setdefault(key, selector)
    for key, value in cfg.items():
        key = key.replace("-", "_")
        key = _CONFIG_ALIASES.get(key, key) or key
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "q" and isinstance(value, list):
            value = ",".join(map(str, value))
        if getattr(args, key, None) is None:
            setattr(args, key, value)


_DEFAULTED = ("q", "prec_bits", "guard_bits", "tol", "output", "format", "jobs", "config", "function", "id",
              "ids", "variant", "s_min", "s_max", "order", "steps", "grid", *_PARAM_FLAGS)


def _merge_global(args: argparse.Namespace, top: argparse.Namespace) -> None:
    # options may appear before or after the subcommand
    for key in ("q", "prec_bits", "guard_bits", "tol", "output", "format", "config", "jobs"):
        if getattr(args, key, None) is None and getattr(top, key, None) is not None:
            setattr(args, key, getattr(top, key))


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key in _DEFAULTED:
        if not hasattr(args, key):
            setattr(args, key, None)
    # top-level options are shadowed by subparser defaults; re-read them
    top_argv = []
    for tok in argv:
        if tok in COMMANDS:
            break
        top_argv.append(tok)
    top, _ = build_parser().parse_known_args(top_argv)
    _merge_global(args, top)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        _apply_config(args)
        if args.command not in COMMANDS:
            raise ConfigError("a command is required: " + ", ".join(COMMANDS))
        fmt = args.format or ("csv" if args.command == "sweep" else "json")
        if fmt not in ("json", "csv", "plain"):
            raise ConfigError(f"unknown format {fmt!r}")
        records, code = COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"qzeta: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = render(records, fmt, argv, args.command)
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
