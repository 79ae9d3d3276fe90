"""Command-line front end: ``validate``, ``calc`` and ``instance`` subcommands.

Exit codes: 0 success or pass, 1 statistical failure, 2 configuration,
schema or domain error, 3 infeasible program. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .bounds import (
    BoundSpec,
    DomainError,
    binomial_tail,
    ccc_delta,
    ccc_delta_exact,
    expected_violation_fraction,
    lindemann_r,
    quantile_index,
    sample_size_ccc,
    sample_size_vanilla,
)
from .scenario import (
    FAMILIES,
    InfeasibleProgram,
    LinearScenarioProgram,
    ProgramSchemaError,
    cascade_discard,
    make_distribution,
    solve,
    support_set,
)
from .validation import ConfigError, Experiment, describe, load_experiment_file, run_experiment, write_report

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3

EXPERIMENT_ALIASES = {
    "vanilla": Experiment.VANILLA_COVERAGE,
    "cdf": Experiment.VIOLATION_CDF,
    "mean": Experiment.VIOLATION_MEAN,
    "membership": Experiment.PROP1_EQUIVALENCE,
    "miscoverage": Experiment.THM4_MISCOVERAGE,
    "ccc": Experiment.CCC_COVERAGE,
} | {e.value: e for e in Experiment}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _fmt(value: float | int | Fraction) -> str:
    """12 significant digits; exact rationals get a fraction annotation."""
    if isinstance(value, int):
        return str(value)
    text = f"{float(value):.12g}"
    if isinstance(value, Fraction) and value.denominator != 1:
        text += f"  (= {value.numerator}/{value.denominator})"
    return text


# ---------------------------------------------------------------------------
# calc


def _need(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise CliError(f"calc {args.formula}: missing {', '.join(missing)}")


def _int(value: Fraction | None, name: str) -> int:
    if value is None or value.denominator != 1:
        raise CliError(f"--{name} must be an integer")
    return int(value)


def _calc_sample_size_vanilla(a):
    _need(a, "r", "delta")
    return sample_size_vanilla(_int(a.r, "r"), a.delta), "smallest m with (r + 1)/(m + 1) <= delta"


def _calc_sample_size_ccc(a):
    _need(a, "r", "eps", "delta")
    return sample_size_ccc(_int(a.r, "r"), a.eps, a.delta), "ceil((2/eps)(r + ln(1/delta)))"


def _calc_expected_violation(a):
    _need(a, "m")
    spec = BoundSpec(_int(a.m, "m"), _int(a.d if a.d is not None else Fraction(1), "d"), _int(a.r if a.r is not None else Fraction(0), "r"))
    return expected_violation_fraction(spec), "E[V] = (r + d)/(m + 1) under cascaded discarding"


def _calc_binomial_tail(a):
    _need(a, "m", "k", "eps")
    return binomial_tail(_int(a.m, "m"), _int(a.k, "k"), a.eps), "P{Bin(m, eps) > k} = sum_{i>k} C(m,i) eps^i (1-eps)^(m-i)"


def _calc_ccc_delta(a):
    _need(a, "m", "eps")
    m = _int(a.m, "m")
    # exact rational arithmetic stays cheap for moderate m
    value = ccc_delta_exact(m, a.eps) if m <= 400 else ccc_delta(m, a.eps)
    return value, "delta = sum_{i<=r} C(m,i) eps^i (1-eps)^(m-i), r = m - ceil((1-eps)(m+1))"


def _calc_quantile_index(a):
    _need(a, "m", "delta")
    idx = quantile_index(_int(a.m, "m"), a.delta)
    return f"p={idx.p} r={idx.r} kind={idx.kind.value}", "p = ceil((1-delta)(m+1)), r = m - p"


def _calc_lindemann_r(a):
    _need(a, "m", "eps", "delta")
    idx = lindemann_r(_int(a.m, "m"), a.eps, a.delta)
    return (
        f"p={idx.p} r={idx.r} kind={idx.kind.value}",
        "p = ceil((1 - eps + sqrt(ln(1/delta)/(2m)))(m+1)), r = m - p",
    )


CALCULATORS: dict[str, Callable[[argparse.Namespace], tuple[object, str]]] = {
    "sample-size-vanilla": _calc_sample_size_vanilla,
    "sample-size-ccc": _calc_sample_size_ccc,
    "expected-violation": _calc_expected_violation,
    "binomial-tail": _calc_binomial_tail,
    "ccc-delta": _calc_ccc_delta,
    "quantile-index": _calc_quantile_index,
    "lindemann-r": _calc_lindemann_r,
}


def cmd_calc(args: argparse.Namespace) -> int:
    try:
        value, formula = CALCULATORS[args.formula](args)
    except DomainError as exc:
        raise CliError(f"calc {args.formula}: {exc}") from None
    print(value if isinstance(value, str) else _fmt(value))
    print(f"formula: {formula}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args: argparse.Namespace) -> int:
    experiment = EXPERIMENT_ALIASES[args.experiment]
    try:
        exp_file = load_experiment_file(
            args.config, defaults={"experiment": experiment.value}, root_seed=args.seed, out_dir=args.out_dir
        )
        if exp_file.experiment is not experiment:
            raise ConfigError(f"experiment: config says {exp_file.experiment.value!r}, command asks for {experiment.value!r}")
        report = run_experiment(exp_file.trial_config(), threads=args.threads or 1)
    except ConfigError as exc:
        raise CliError(f"invalid config {args.config}: {exc}") from None
    csv_path, json_path = write_report(report, exp_file.out_dir)
    print(describe(report))
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# instance


def _load_program(path: str) -> LinearScenarioProgram:
    try:
        return LinearScenarioProgram.load(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except ProgramSchemaError as exc:
        raise CliError(f"{path}: {exc}") from None


def _solution_doc(sol) -> dict:
    return {
        "x_star": [float(v) for v in sol.x_star],
        "objective": float(sol.objective),
        "active": list(sol.active_indices),
        "support": list(sol.support_indices),
        "discarded": list(sol.discarded_indices),
        "degenerate": bool(sol.degenerate),
    }


def cmd_instance(args: argparse.Namespace) -> int:
    if args.action == "generate":
        if args.family not in FAMILIES:
            raise CliError(f"--family must be one of {sorted(FAMILIES)}")
        if args.family == "random_lp":
            family = FAMILIES["random_lp"](args.d)
        else:
            family = FAMILIES[args.family](make_distribution(args.distribution))
        if args.m < family.dimension:
            raise CliError(f"--m must be at least the dimension {family.dimension}")
        seed = args.seed if args.seed is not None else 0
        program = family.build(family.draw(np.random.default_rng(seed), args.m))
        out = Path(args.output) if args.output else Path(args.out_dir or ".") / f"{args.family}_{args.m}_{seed}.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(program.dumps() + "\n")
        print(out)
        return EXIT_OK

    if not args.program:
        raise CliError(f"instance {args.action}: a program JSON path is required")
    program = _load_program(args.program)
    try:
        if args.action == "solve":
            if args.r:
                result = cascade_discard(program, args.r)
                doc = _solution_doc(result.solution) | {"stages": [list(s) for s in result.stages], "tight": result.tight}
            else:
                doc = _solution_doc(solve(program))
        else:
            sol = solve(program)
            removal = support_set(program, sol)
            doc = {
                "support": list(removal),
                "fast_path": list(sol.support_indices),
                "active": list(sol.active_indices),
                "agree": list(removal) == list(sol.support_indices),
                "degenerate": bool(sol.degenerate),
            }
    except InfeasibleProgram as exc:
        raise CliError(f"infeasible program: {exc}", EXIT_INFEASIBLE) from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="root seed (overrides the config)")
    parser.add_argument("--threads", type=int, default=default, help="worker threads for trials")
    parser.add_argument("--out-dir", default=default, help="output directory (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conformal-scenario", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="run a validation experiment")
    p.add_argument("experiment", choices=sorted(EXPERIMENT_ALIASES))
    p.add_argument("--config", required=True, help="experiment JSON file")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calc", help="evaluate a closed-form bound")
    p.add_argument("formula", choices=sorted(CALCULATORS))
    for name in ("m", "r", "d", "k", "eps", "delta"):
        p.add_argument(f"--{name}", type=_rational)
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_calc)

    p = sub.add_parser("instance", help="generate, solve or audit a scenario program")
    p.add_argument("action", choices=["generate", "solve", "support"])
    p.add_argument("program", nargs="?", help="program JSON (solve, support)")
    p.add_argument("--family", default="order", help="generate: order, interval or random_lp")
    p.add_argument("--distribution", default="uniform", help="generate: uniform, gaussian or exponential")
    p.add_argument("--m", type=int, default=10, help="generate: number of samples")
    p.add_argument("--d", type=int, default=3, help="generate: random_lp dimension")
    p.add_argument("--r", type=int, default=0, help="solve: samples to discard by cascade")
    p.add_argument("--output", help="generate: output file")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_instance)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:  # domain errors that slipped past a specific handler
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
