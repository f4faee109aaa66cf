"""Command-line entry point ``tilted-stop``.

Every subcommand writes one JSON object (default) or a CSV table.  Exit
status is 0 on success, 2 on invalid arguments and 1 on numeric failure or
unwritable output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Optional, Sequence

from . import asymptotics, exact_engine, montecarlo, samplers
from .errors import DomainError, NumericError, SizeLimitError
from .permutation_core import (
    MAX_ENUMERATION_N,
    TiltedModel,
    lr_histogram,
    raising_factorial,
    stirling_row,
)


class UsageError(Exception):
    """Invalid command-line input; reported on one line with exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _positive_int(name: str, value: Optional[int]) -> int:
    if value is None or value < 1:
        raise UsageError(f"{name} must be ≥ 1")
    return value


def _model(args) -> TiltedModel:
    n = _positive_int("n", args.n)
    if not (math.isfinite(args.q) and args.q > 0):
        raise UsageError("q must be positive and finite")
    return TiltedModel(n, args.q)


def _cutoff(args, n: int) -> int:
    if args.m is None or not 0 <= args.m <= n - 1:
        raise UsageError(f"m must be in 0..{n - 1}")
    return args.m


def _spec(args) -> asymptotics.QSequenceSpec:
    for name in ("alpha", "beta"):
        if not math.isfinite(getattr(args, name)):
            raise UsageError(f"{name} must be finite")
    if not (math.isfinite(args.a) and args.a > 0):
        raise UsageError("a must be positive and finite")
    return asymptotics.QSequenceSpec(args.a, args.alpha, args.beta)


def _seed(args) -> samplers.RandomSource:
    for name in ("seed", "stream"):
        value = getattr(args, name)
        if not 0 <= value < 1 << 64:
            raise UsageError(f"{name} must be a 64-bit unsigned integer")
    return samplers.RandomSource(args.seed, args.stream)


def cmd_exact(args) -> dict:
    model = _model(args)
    ev = exact_engine.success_probability(model, _cutoff(args, model.n))
    return {"n": model.n, "q": model.q, "m": ev.m, "log_prob": ev.log_prob, "prob": ev.prob}


def cmd_scan(args) -> list[dict]:
    model = _model(args)
    if model.n > exact_engine.MAX_SCAN_N:
        raise UsageError(f"n must be ≤ {exact_engine.MAX_SCAN_N} for a scan")
    table = exact_engine.scan(model)
    probs = table.prob
    return [
        {"m": m, "log_prob": float(table.log_prob[m]), "prob": float(probs[m])}
        for m in range(model.n)
    ]


def cmd_optimal(args) -> dict:
    model = _model(args)
    if model.n > exact_engine.MAX_SCAN_N:
        raise UsageError(f"n must be ≤ {exact_engine.MAX_SCAN_N} for a scan")
    res = exact_engine.optimal_cutoff(model)
    return {
        "n": model.n,
        "q": model.q,
        "m_star": res.m_star,
        "log_prob": res.evaluation.log_prob,
        "prob": res.evaluation.prob,
    }


def cmd_expect(args) -> dict:
    if args.q is None and args.a is None:
        raise UsageError("expect needs --q or --a")
    if args.q is not None:
        model = _model(args)
        return {"n": model.n, "q": model.q, "expected": exact_engine.expected_lr_min(model)}
    spec = _spec(args)
    n = _positive_int("n", args.n)
    if n < 2:
        raise UsageError("n must be ≥ 2 for a q-sequence")
    q = spec.q(n)
    return {
        "n": n,
        "q": q,
        "a": spec.a,
        "alpha": spec.alpha,
        "beta": spec.beta,
        "expected": exact_engine.expected_lr_min(TiltedModel(n, q)),
        "asymptotic": asymptotics.expected_lr_asymptotic(spec, n),
    }


def cmd_sample(args) -> dict:
    model = _model(args)
    rng = _seed(args)
    count = _positive_int("count", args.count)
    perms = samplers.sample_batch(model, rng, count, args.method)
    return {
        "n": model.n,
        "q": model.q,
        "seed": rng.seed,
        "stream": rng.stream_id,
        "method": args.method,
        "permutations": perms.tolist(),
    }


def cmd_simulate(args) -> dict:
    model = _model(args)
    m = _cutoff(args, model.n)
    trials = _positive_int("trials", args.trials)
    plan = montecarlo.TrialPlan(
        model, exact_engine.CutoffStrategy(m), trials, _seed(args), args.method
    )
    report = montecarlo.estimate(plan)
    return {
        "n": model.n,
        "q": model.q,
        "m": m,
        "seed": args.seed,
        "trials": trials,
        "method": args.method,
        "successes": report.successes,
        "p_hat": report.p_hat,
        "ci95": report.ci95_half_width,
        "prob": report.exact_ref,
    }


def cmd_regime(args) -> dict:
    report = asymptotics.classify(_spec(args))
    out = report.to_dict()
    out["floor_ok"] = asymptotics.limiting_probability_floor_check(report)
    if args.n is not None:
        n = _positive_int("n", args.n)
        out["n"] = n
        out["m_rec"] = report.m_rec(n)
    return out


def cmd_validate(args) -> dict:
    """Enumeration checks of the closed forms for every n up to ``max_n``."""
    max_n = _positive_int("max-n", args.max_n)
    if max_n > 8:
        raise UsageError("max-n must be ≤ 8")
    qs = (0.1, 0.5, 1.0, 2.0, 10.0)
    worst_success = 0.0
    worst_norm = 0.0
    histograms_ok = True
    for n in range(1, max_n + 1):
        hist = lr_histogram(n)
        histograms_ok &= hist.counts == stirling_row(n)
        for q in qs:
            model = TiltedModel(n, q)
            norm = math.fsum(c * q**j for j, c in hist.counts.items())
            worst_norm = max(worst_norm, abs(norm / raising_factorial(q, n) - 1.0))
            for m in range(n):
                diff = abs(
                    exact_engine.success_probability(model, m).prob
                    - exact_engine.brute_force_success(model, m)
                )
                worst_success = max(worst_success, diff)
    checks = [
        {"check": "success_vs_enumeration", "max_abs_err": worst_success, "tol": 1e-12,
         "passed": worst_success <= 1e-12},
        {"check": "normalization", "max_rel_err": worst_norm, "tol": 1e-12,
         "passed": worst_norm <= 1e-12},
        {"check": "histogram_vs_stirling", "passed": bool(histograms_ok)},
    ]
    return {"max_n": max_n, "checks": checks, "passed": all(c["passed"] for c in checks)}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tilted-stop",
        description="Secretary-problem cutoffs under left-to-right-minimum tilted arrivals.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name: str, help_text: str, fmt: str = "json") -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
        p.add_argument("--output", "-o", help="write to this file instead of stdout")
        return p

    def add_nq(p: argparse.ArgumentParser, q_required: bool = True) -> None:
        p.add_argument("--n", type=int, required=True, help="number of items")
        p.add_argument("--q", type=float, required=q_required, help="tilt parameter")

    def add_seed(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--stream", type=int, default=0, help="stream id")
        p.add_argument("--method", choices=samplers.METHODS, default="location")

    def add_spec(p: argparse.ArgumentParser, required: bool) -> None:
        p.add_argument("--a", type=float, required=required, help="coefficient of q_n")
        p.add_argument("--alpha", type=float, default=0.0, help="exponent of n")
        p.add_argument("--beta", type=float, default=0.0, help="exponent of log n")

    p = add("exact", "exact success probability of one cutoff")
    add_nq(p)
    p.add_argument("--m", type=int, required=True, help="cutoff")
    p.set_defaults(func=cmd_exact)

    p = add("scan", "success probability of every cutoff m = 0..n-1", fmt="csv")
    add_nq(p)
    p.set_defaults(func=cmd_scan)

    p = add("optimal", "optimal cutoff by full scan")
    add_nq(p)
    p.set_defaults(func=cmd_optimal)

    p = add("expect", "expected number of left-to-right minima")
    add_nq(p, q_required=False)
    add_spec(p, required=False)
    p.set_defaults(func=cmd_expect)

    p = add("sample", "draw tilted random permutations")
    add_nq(p)
    add_seed(p)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = add("simulate", "Monte Carlo estimate of a cutoff's success probability")
    add_nq(p)
    p.add_argument("--m", type=int, required=True, help="cutoff")
    p.add_argument("--trials", type=int, default=100_000)
    add_seed(p)
    p.set_defaults(func=cmd_simulate)

    p = add("regime", "asymptotic regime of q_n = a n^alpha (log n)^beta")
    add_spec(p, required=True)
    p.add_argument("--n", type=int, help="also report the cutoff recommended at this n")
    p.set_defaults(func=cmd_regime)

    p = add("validate", "enumeration checks of the exact formulas")
    p.add_argument("--max-n", type=int, default=min(8, MAX_ENUMERATION_N))
    p.set_defaults(func=cmd_validate)
    return parser


def _csv_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(",", ":"))
    return "" if value is None else str(value)


def render(result: dict | list[dict], fmt: str) -> str:
    rows = result if isinstance(result, list) else None
    if fmt == "json":
        payload = {"rows": rows} if rows is not None else result
        return json.dumps(payload, separators=(",", ":"), allow_nan=False) + "\n"
    rows = rows if rows is not None else [result]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys()) if rows else []
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_value(row[k]) for k in header])
    return buf.getvalue()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = args.func(args)
        text = render(result, args.format)
    except (UsageError, DomainError, SizeLimitError) as exc:
        print(f"tilted-stop: error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, ValueError, OverflowError) as exc:
        print(f"tilted-stop: numeric failure: {exc}", file=sys.stderr)
        return 1
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"tilted-stop: cannot write {args.output}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    if args.command == "validate" and not result["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
