"""Command-line front end.

Every subcommand writes one CSV (stdout unless ``--out`` is given) whose
'#' header records the version, run parameters and a canonical command
line that reproduces the body.  Exit codes: 0 pass, 2 identity check
failed, 1 usage or runtime error.

Process expressions use ``t``, ``w1..wd``, numbers, ``+ - * / ^``,
parentheses and ``sin cos exp log sqrt abs tanh``.  ``^`` binds tightest
and is right-associative; unary minus binds looser than ``^`` (so
``-2^2`` is -4); there is no implicit multiplication.
"""

from __future__ import annotations

import argparse
import math
import shlex
import sys
from typing import Sequence

from .drift import drift_shift_paths, explosion_probability, martingale_condition_report
from .estimators import (
    GSpec,
    cdf_time_integral,
    conjecture_probe,
    curve_checks,
    gk_identity_check,
    identity_report,
    martingale_check,
    supermartingale_curve,
)
from .exponent import euler_super_sde, eval_on_path, exponent_paths
from .expr import ExprError, parse_process
from .mc import ExclusionQuotaExceeded, IdentityReport, MCConfig
from .output import driver_trace, drift_trace, exponent_trace, write_csv
from .paths import make_grid, sample_drivers

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

# flags that never change the CSV body and are left out of the recorded command
_NOT_RECORDED = {"out", "workers", "help"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="superexp",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    def common(p, process=True, y=True):
        if process:
            p.add_argument("--process", required=True, help="comma-separated component expressions")
            p.add_argument("--d", type=_positive(int), default=1, help="dimension (default 1)")
        p.add_argument("--T", type=_positive(float), default=1.0, help="horizon (default 1)")
        p.add_argument("--steps", type=_positive(int), default=1024, help="time steps (default 1024)")
        p.add_argument("--paths", type=_positive(int), default=100_000, help="Monte Carlo paths")
        if y:
            p.add_argument("--y", type=_positive(float), default=1.0, help="initial value y > 0")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--chunk-size", type=_positive(int), default=2048,
                       help="paths per reduction chunk; part of the result's identity")
        p.add_argument("--pilot-paths", type=_nonneg_int, default=20_000,
                       help="paths of the n vs n/2 step pilot for the dt allowance (0 disables)")
        p.add_argument("--workers", type=_positive(int), default=1,
                       help="worker threads; never changes results")
        p.add_argument("--out", default="-", help="output CSV path (default stdout)")

    p = sub.add_parser("identity", help="G-weighted identity for a deterministic process")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--G", default="one", help="one | identity | indicator:c | capped:c | expr:<u-expression>")

    p = sub.add_parser("curve", help="E[exp(Y(t))] over a time grid (supermartingale check)")
    common(p)
    p.add_argument("--t", type=_floats, required=True, help="comma-separated times")

    p = sub.add_parser("cdf", help="distribution of the time integral A(t) and its factorization")
    common(p, y=False)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--a", type=_floats, required=True, help="comma-separated increasing thresholds")

    p = sub.add_parser("martingale", help="E[exp(Y(t) - y)] against 1, optionally stopped at Y >= N")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--N", type=_positive(float), default=None, help="barrier for the stopped process")

    p = sub.add_parser("driftshift", help="martingale condition via the drift-shifted process")
    common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--variant", choices=("z_prime", "z_x"), default="z_prime",
                   help="exponential integrated against |X'|^2 in the right side")

    p = sub.add_parser("gk", help="time integral of exp(W(u) - u/2): distribution identity")
    common(p, process=False, y=False)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--a", type=_floats, required=True)

    p = sub.add_parser("probe", help="exploratory running estimate of E[2 Z(t) / A(t)]")
    common(p, process=False, y=False)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--sizes", type=_floats, default=[1e3, 1e4, 1e5, 1e6])

    p = sub.add_parser("paths", help="dump per-path traces")
    common(p)
    p.add_argument("--trace", choices=("driver", "exponent", "driftshift"), default="driver")
    return parser


def _canonical_command(parser: argparse.ArgumentParser, args: argparse.Namespace) -> str:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    parts = ["superexp", args.command]
    for action in subparser._actions:
        if action.dest in _NOT_RECORDED or not action.option_strings:
            continue
        value = getattr(args, action.dest)
        if value is None:
            continue
        if isinstance(value, list):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        parts += [action.option_strings[0], str(value)]
    return shlex.join(parts)


def _config(args) -> MCConfig:
    return MCConfig(
        T=args.T,
        n_steps=args.steps,
        n_paths=args.paths,
        seed=args.seed,
        workers=args.workers,
        chunk_size=args.chunk_size,
        pilot_paths=min(args.pilot_paths, args.paths),
    )


def _report_row(r: IdentityReport):
    return [
        r.lhs.mean, r.lhs.std_error, r.rhs.mean, r.rhs.std_error,
        r.lhs.n_paths, r.lhs.n_excluded, r.rhs.n_excluded, r.z, r.allowance, r.passed,
    ]


_REPORT_HEADER = [
    "lhs_mean", "lhs_se", "rhs_mean", "rhs_se",
    "n_paths", "lhs_excluded", "rhs_excluded", "z", "allowance", "pass",
]


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _run_command(args, comments) -> int:
    cmd = args.command
    spec = None
    if hasattr(args, "process"):
        try:
            spec = parse_process(args.process, args.d)
        except ExprError as err:
            err.source = args.process
            raise
    if spec is not None:
        comments.append(f"process={args.process!r} d={args.d} kind={spec.kind.value}")
    cfg = _config(args)

    if cmd == "identity":
        if not spec.is_deterministic:
            raise UsageError(
                f"identity requires a deterministic process; {args.process!r} depends on w"
            )
        try:
            g = GSpec.parse(args.G)
        except ExprError as err:
            err.source = args.G.partition(":")[2]
            raise
        r = identity_report(spec, g, args.y, args.t, cfg)
        write_csv(args.out, comments, ["G", "y", "t"] + _REPORT_HEADER,
                  [[args.G, args.y, args.t] + _report_row(r)])
        _log(f"identity G={args.G}: z={r.z:.3f} allowance={r.allowance:.3g} -> {'pass' if r.passed else 'FAIL'}")
        return EXIT_PASS if r.passed else EXIT_FAIL

    if cmd == "curve":
        curve = supermartingale_curve(spec, args.y, args.t, cfg)
        checks = curve_checks(curve, args.y)
        bound = math.exp(args.y)
        rows = [[p.t, p.estimate.mean, p.estimate.std_error, p.estimate.n_paths,
                 p.estimate.n_excluded, bound] for p in curve]
        comments.append(f"bounded={checks['bounded']} nonincreasing={checks['nonincreasing']}")
        write_csv(args.out, comments, ["t", "mean", "se", "n_paths", "n_excluded", "exp_y"], rows)
        ok = all(checks.values())
        _log(f"curve: {checks} -> {'pass' if ok else 'FAIL'}")
        return EXIT_PASS if ok else EXIT_FAIL

    if cmd == "cdf":
        c = cdf_time_integral(spec, args.t, args.a, cfg)
        rows = [[a, f.mean, f.std_error, d.mean, d.std_error, r.mean, r.std_error]
                for a, f, d, r in zip(c.a, c.cdf, c.factor, c.remark)]
        ok = c.factor_nonincreasing()
        comments.append(f"factor_nonincreasing={ok}")
        write_csv(args.out, comments,
                  ["a", "F", "F_se", "D", "D_se", "remark", "remark_se"], rows)
        _log(f"cdf: factor nonincreasing within 2 SE -> {'pass' if ok else 'FAIL'}")
        return EXIT_PASS if ok else EXIT_FAIL

    if cmd == "martingale":
        r = martingale_check(spec, args.y, args.t, cfg, barrier=args.N)
        n_col = "inf" if args.N is None else args.N
        write_csv(args.out, comments,
                  ["t", "N", "mean", "se", "n_paths", "n_excluded", "z", "allowance", "pass"],
                  [[args.t, n_col, r.lhs.mean, r.lhs.std_error, r.lhs.n_paths,
                    r.lhs.n_excluded, r.z, r.allowance, r.passed]])
        _log(f"martingale: mean={r.lhs.mean:.6f} se={r.lhs.std_error:.2g} -> {'pass' if r.passed else 'FAIL'}")
        return EXIT_PASS if r.passed else EXIT_FAIL

    if cmd == "driftshift":
        r = martingale_condition_report(spec, args.y, args.t, cfg, variant=args.variant)
        p = explosion_probability(spec, args.y, args.t, cfg)
        write_csv(args.out, comments,
                  ["variant", "y", "t"] + _REPORT_HEADER + ["p_explode", "p_explode_se"],
                  [[args.variant, args.y, args.t] + _report_row(r) + [p.mean, p.std_error]])
        _log(f"driftshift: z={r.z:.3f} P(explode)={p.mean:.4g} -> {'pass' if r.passed else 'FAIL'}")
        return EXIT_PASS if r.passed else EXIT_FAIL

    if cmd == "gk":
        reports = [(a, gk_identity_check(args.t, a, cfg)) for a in args.a]
        write_csv(args.out, comments, ["a", "t"] + _REPORT_HEADER,
                  [[a, args.t] + _report_row(r) for a, r in reports])
        ok = all(r.passed for _, r in reports)
        _log(f"gk: z={[round(r.z, 3) for _, r in reports]} -> {'pass' if ok else 'FAIL'}")
        return EXIT_PASS if ok else EXIT_FAIL

    if cmd == "probe":
        sizes = [int(s) for s in args.sizes]
        table = conjecture_probe(args.t, cfg, sizes)
        comments.append("exploratory: trend only, no pass/fail verdict")
        write_csv(args.out, comments, ["n", "mean", "se"],
                  [[n, e.mean, e.std_error] for n, e in table])
        return EXIT_PASS

    if cmd == "paths":
        grid = make_grid(args.T, args.steps)
        driver = sample_drivers(grid, spec.d, args.seed, 0, args.paths)
        if args.trace == "driver":
            header, rows = driver_trace(driver)
        elif args.trace == "exponent":
            x = eval_on_path(spec, driver)
            header, rows = exponent_trace(driver, exponent_paths(x, driver, args.y),
                                          euler_super_sde(x, driver, args.y))
        else:
            header, rows = drift_trace(driver, drift_shift_paths(spec, driver, args.y))
        write_csv(args.out, comments, header, rows)
        return EXIT_PASS
    raise UsageError(f"unknown subcommand {cmd!r}")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        _log(str(err))
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    comments = [
        f"seed={args.seed} n_paths={args.paths} n_steps={args.steps} T={args.T!r}"
        + (f" y={args.y!r}" if hasattr(args, "y") else "")
        + f" chunk_size={args.chunk_size} pilot_paths={args.pilot_paths}",
        f"command: {_canonical_command(parser, args)}",
    ]
    try:
        return _run_command(args, comments)
    except ExprError as err:
        source = getattr(err, "source", None)
        caret = f"\n  {source}\n  {' ' * err.position}^" if source is not None else ""
        _log(f"superexp {args.command}: {err}{caret}")
        return EXIT_ERROR
    except (UsageError, ValueError, ArithmeticError, ExclusionQuotaExceeded) as err:
        _log(f"superexp {args.command}: error: {err}")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
