"""Command-line interface.

Every subcommand writes one CSV table (``--out`` or stdout).  Exit codes:
0 pass, 1 assertion failure (failing row echoed on stderr), 2 infeasible
parameters, 3 bad input.
"""

import argparse
import math
import os
import sys

import numpy as np

from ._validation import InfeasibleParametersError, InvalidInputError
from .function_model import classify, parse_spec
from .functionals import (
    ConstantsLedger,
    alpha_beta,
    budget_csv_thm12,
    budget_csv_thm13,
    rate_thm11,
    published_params,
    select_params_thm12,
    select_params_thm13,
)
from .harness import (
    atomic_reference_law,
    classify_report,
    continuous_reference_law,
    convergence_sweep,
    levelset_consistency,
    levelset_sweep,
    verify_mean_value,
    verify_pik_asymptotic,
)
from .sieve import build_sieve, dump_table, histogram, histogram_csv

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_BAD_INPUT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_BAD_INPUT)


class _Failure(Exception):
    def __init__(self, row):
        super().__init__(row)
        self.row = row


def _x_list(text):
    try:
        vals = [int(float(v)) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"bad x list {text!r}") from None
    if not vals:
        raise InvalidInputError("empty x list")
    return vals


def _load_spec(arg):
    if arg is None:
        raise InvalidInputError("--spec is required")
    if os.path.exists(arg):
        with open(arg) as fh:
            return parse_spec(fh.read())
    if "family=" in arg:
        return parse_spec(arg)
    raise InvalidInputError(f"spec file not found: {arg}")


def _fmt(v):
    return f"{float(v):.17g}"


# -- subcommands ---------------------------------------------------------

def cmd_sieve(args, spec, led):
    x = _x_list(args.x)[-1]
    table = build_sieve(spec, x, args.segment_size)
    if args.dump:
        with open(args.dump, "wb") as fh:
            dump_table(table, fh)
    vals = table.population
    lo, hi = float(vals.min()), float(vals.max())
    edges = np.linspace(lo, hi if hi > lo else lo + 1.0, args.bins + 1)
    counts, cdf = histogram(vals, edges)
    return histogram_csv(edges, counts, cdf)


def cmd_classify(args, spec, led):
    return classify_report(spec)


def cmd_limit(args, spec, led):
    cls = classify(spec)
    ys = np.linspace(args.y_min, args.y_max, args.points)
    if args.seed is not None and args.jitter > 0:
        rng = np.random.default_rng(args.seed)
        ys = np.sort(ys + rng.uniform(-args.jitter, args.jitter, ys.size))
    if cls.atomic:
        law = atomic_reference_law(spec, args.p_cut, args.m_cut)
        if args.atoms:
            return law.atoms_csv()
        err = law.error_budget_
        lines = ["y,F,err"] + [f"{_fmt(y)},{_fmt(F)},{_fmt(err)}" for y, F in zip(ys, law.predict(ys))]
        return "\n".join(lines) + "\n"
    if cls.continuous:
        _, law = continuous_reference_law(spec, args.p_max, args.t_int)
        return law.law_csv(ys)
    raise InvalidInputError(f"no limit law available: {cls.verdict}")


def cmd_bounds(args, spec, led):
    xs = _x_list(args.x)
    if args.k:
        rows = []
        for x in xs:
            for k in (int(v) for v in args.k.split(",")):
                p = select_params_thm13(spec, x, k, constants=led, choice=args.levelset_choice)
                if args.require_feasible and not p.feasible:
                    raise InfeasibleParametersError(f"x={x} k={k}: " + "; ".join(p.violations))
                rows.append((x, p))
        return budget_csv_thm13(rows)
    rows = []
    for x in xs:
        a, b = alpha_beta(spec, math.sqrt(x))
        rate = rate_thm11(spec, x) if classify(spec).atomic else _nan_rate()
        if args.params == "published":
            p = published_params(spec, x, c=args.published_c, constants=led)
        else:
            p = select_params_thm12(spec, x, constants=led)
        if args.require_feasible and not p.feasible:
            raise InfeasibleParametersError(f"x={x}: side conditions fail ({p.choice})")
        rows.append((x, a, b, p, rate))
    return budget_csv_thm12(rows)


def _nan_rate():
    from .functionals import RateBreakdown

    return RateBreakdown(math.nan, math.nan, math.nan)


def cmd_compare(args, spec, led):
    xs = _x_list(args.x)
    cls = classify(spec)
    mode = args.mode or ("atomic" if cls.atomic or not cls.continuous else "continuous")
    table = build_sieve(spec, max(xs))
    rep = convergence_sweep(spec, xs, mode, table=table, constants=led, params=args.params)
    out = rep.to_csv()
    if not rep.stable:
        raise _Failure(f"fitted constant unstable: spread {rep.spread:.4g}\n" + out)
    return out


def cmd_levelset(args, spec, led):
    x = _x_list(args.x)[-1]
    table = build_sieve(spec, x)
    ks = [int(v) for v in args.k.split(",")]
    if args.check_dft:
        lines = ["x,k,tau,residual,direct_re,direct_im"]
        for k in ks:
            res, d, _ = levelset_consistency(table, k, args.tau, args.R, args.theta_points)
            lines.append(",".join(_fmt(v) for v in (x, k, args.tau, res, d.real, d.imag)))
            if res > 1e-9 * max(1.0, float(np.count_nonzero(table.omega_population == k))):
                raise _Failure(lines[-1])
        return "\n".join(lines) + "\n"
    rep = levelset_sweep(spec, table, ks, constants=led)
    out = rep.to_csv()
    if rep.spread >= 3.0:
        raise _Failure(f"level-set constant unstable: spread {rep.spread:.4g}\n" + out)
    return out


def cmd_meanvalue(args, spec, led):
    xs = _x_list(args.x)
    table = build_sieve(spec, max(xs))
    lines = ["x,tau,R,direct_re,direct_im,pred_re,pred_im,deviation,error_scale,conditions_ok"]
    failing = None
    for x in xs:
        c = verify_mean_value(spec, args.tau, args.R, x, table=table, constants=led)
        row = ",".join(_fmt(v) for v in (x, args.tau, args.R, c.direct.real, c.direct.imag,
                                         c.predicted.real, c.predicted.imag, c.deviation,
                                         c.error_scale, c.conditions_ok))
        lines.append(row)
        if c.passed is False and failing is None:
            failing = row
    out = "\n".join(lines) + "\n"
    if failing:
        raise _Failure(failing)
    return out


def cmd_report(args, spec, led):
    xs = _x_list(args.x)
    table = build_sieve(spec, max(xs))
    lines = ["check,x,value,passed"]
    failed = []
    cls = classify(spec)
    mode = "atomic" if cls.atomic else "continuous"
    if len(xs) >= 3:
        rep = convergence_sweep(spec, xs, mode, table=table, constants=led)
        lines.append(f"distance_spread,{max(xs)},{_fmt(rep.spread)},{int(rep.stable)}")
        if not rep.stable:
            failed.append(lines[-1])
    for x in xs:
        k = max(1, round(math.log(math.log(x))))
        try:
            pk = verify_pik_asymptotic(table.prefix(x), k, led)
            lines.append(f"pik_ratio,{x},{_fmt(pk.ratio)},{int(pk.passed)}")
            if not pk.passed:
                failed.append(lines[-1])
        except InvalidInputError:
            pass
        mv = verify_mean_value(spec, 1.0, 100.0, x, table=table, constants=led)
        ok = "" if mv.passed is None else int(mv.passed)
        lines.append(f"meanvalue_deviation,{x},{_fmt(mv.deviation)},{ok}")
        if mv.passed is False:
            failed.append(lines[-1])
    out = "\n".join(lines) + "\n"
    if failed:
        raise _Failure("\n".join(failed))
    return out


COMMANDS = {
    "sieve": cmd_sieve,
    "classify": cmd_classify,
    "limit": cmd_limit,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "levelset": cmd_levelset,
    "meanvalue": cmd_meanvalue,
    "report": cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="spec file (or inline 'family=...' text)")
    common.add_argument("--x", default="100000", help="x or comma-separated x grid")
    common.add_argument("--out", help="output CSV path (default stdout)")
    common.add_argument("--constants", help="constants ledger file (name=value lines)")
    common.add_argument("--seed", type=int, default=None, help="seed for grid jitter")

    parser = _Parser(prog="ewlab", description="Distribution of additive functions: experiments and bounds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sieve", parents=[common], help="sieve f(n) and omega(n); histogram CSV")
    p.add_argument("--segment-size", type=int, default=2**20)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--dump", help="write the binary table dump here")

    sub.add_parser("classify", parents=[common], help="criterion-series partial sums and verdict")

    p = sub.add_parser("limit", parents=[common], help="limit law CSV (y,F,err) or atoms (fm,weight)")
    p.add_argument("--y-min", type=float, default=-1.0)
    p.add_argument("--y-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--atoms", action="store_true")
    p.add_argument("--p-cut", type=int, default=10**6)
    p.add_argument("--m-cut", type=int, default=10**6)
    p.add_argument("--p-max", type=int, default=3 * 10**4)
    p.add_argument("--t-int", type=float, default=5e3)

    p = sub.add_parser("bounds", parents=[common], help="error budget CSV")
    p.add_argument("--k", help="comma-separated k values (level-set budget)")
    p.add_argument("--params", choices=["published", "search"], default="published")
    p.add_argument("--published-c", type=float, default=1.0)
    p.add_argument("--levelset-choice", choices=["published", "search"], default="published")
    p.add_argument("--require-feasible", action="store_true")

    p = sub.add_parser("compare", parents=[common], help="distance sweep over the x grid")
    p.add_argument("--mode", choices=["atomic", "continuous"])
    p.add_argument("--params", choices=["published", "search"], default="published")

    p = sub.add_parser("levelset", parents=[common], help="level-set distances or DFT extraction check")
    p.add_argument("--k", default="3")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--theta-points", type=int, default=64)
    p.add_argument("--check-dft", action="store_true")

    p = sub.add_parser("meanvalue", parents=[common], help="direct vs predicted mean value")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--R", type=float, default=100.0)

    sub.add_parser("report", parents=[common], help="summary of all checks")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _load_spec(args.spec)
        led = ConstantsLedger.load(args.constants) if args.constants else ConstantsLedger()
        out = COMMANDS[args.command](args, spec, led)
        code = EXIT_OK
    except _Failure as exc:
        sys.stderr.write(f"assertion failed:\n{exc.row}\n")
        out, code = None, EXIT_FAIL
    except InfeasibleParametersError as exc:
        sys.stderr.write(f"infeasible parameters: {exc}\n")
        return EXIT_INFEASIBLE
    except (InvalidInputError, OSError) as exc:
        sys.stderr.write(f"bad input: {exc}\n")
        return EXIT_BAD_INPUT
    if out is not None:
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(out)
        else:
            sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
