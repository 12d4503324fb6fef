"""Command-line interface: ``sbstlab <subcommand> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
from dataclasses import replace
from pathlib import Path

from .exec_cov import ExecLimits, run_suite, write_trace_csv
from .ge_gen import GeConfig, GenerationFailure, Target, run_ge
from .harness import (
    CRITERIA,
    LEVELS,
    MANIFEST_HEADER,
    PROFILES,
    ExperimentPlan,
    PlanError,
    derive_seed,
    emit_run,
    report,
    run_experiment,
)
from .search import GaConfig, RandomConfig, run_ga, run_random
from .sut_lang import SutSyntaxError, SutValidationError, parse, render

DEFAULT_SEED = 42
DEFAULT_OUT = "sbstlab-out"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _domain(text: str) -> tuple[int, int]:
    lo, sep, hi = text.rpartition(":")
    try:
        if not sep:
            raise ValueError
        lo_v, hi_v = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if lo_v >= hi_v:
        raise argparse.ArgumentTypeError("domain needs lo < hi")
    return lo_v, hi_v


def _target(text: str) -> Target:
    try:
        return Target.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected statements=<n> or branches=<n>, got {text!r}") from None


def _add_seed(p):
    p.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                   help=f"master seed, unsigned 64-bit (default {DEFAULT_SEED})")


def _add_out(p, what: str):
    p.add_argument("--out", default=None,
                   help=f"{what} (default: $SBSTLAB_OUT, else ./{DEFAULT_OUT})")


def _add_scale(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--desk-scale", dest="profile", action="store_const", const="desk",
                   help="small budgets that finish in minutes (default)")
    g.add_argument("--paper-scale", dest="profile", action="store_const", const="paper",
                   help="full budgets: populations of 200 for 10000 generations")
    p.set_defaults(profile="desk")


def _add_exec(p):
    p.add_argument("--suite-size", type=_count, default=10, metavar="M",
                   help="test cases per suite (default 10)")
    p.add_argument("--max-loop-iters", type=_count, default=1000, metavar="N",
                   help="iterations allowed per loop entry (default 1000)")
    p.add_argument("--domain", type=_domain, default=(-1_000_000, 1_000_000),
                   metavar="LO:HI", help="input value range (default -1000000:1000000)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbstlab",
                     description="Generate programs with grammatical evolution and "
                                 "compare GA and random test-data generation on them.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="evolve programs to a size target")
    p.add_argument("--target", type=_target, required=True, metavar="KIND=N",
                   help="statements=<n> or branches=<n>")
    p.add_argument("--count", type=_count, default=1, help="programs to write (default 1)")
    p.add_argument("--input-arity", type=_count, default=5, metavar="K",
                   help="number of inputs (default 5)")
    _add_seed(p)
    _add_out(p, "directory for .sut files and manifest.csv")
    _add_scale(p)

    for name, what in (("run-ga", "genetic algorithm"), ("run-random", "random testing")):
        p = sub.add_parser(name, help=f"test one .sut file with {what}")
        p.add_argument("sut", help="program file")
        p.add_argument("--criterion", choices=CRITERIA, default="branch",
                       help="coverage criterion (default branch)")
        _add_seed(p)
        _add_out(p, "if given, write the best suite and its distance trace here")
        _add_scale(p)
        _add_exec(p)

    p = sub.add_parser("experiment", help="run the full GA vs random experiment")
    p.add_argument("--plan", help="plan file of key=value lines; flags override it")
    p.add_argument("--criterion", choices=CRITERIA, help="run only this criterion")
    p.add_argument("--level", choices=LEVELS, help="run only this complexity level")
    p.add_argument("--programs-per-cell", type=_count, metavar="N",
                   help="programs per cell, at least 2 (default 10)")
    p.add_argument("--input-arity", type=_count, metavar="K", help="number of inputs (default 5)")
    p.add_argument("--jobs", type=_count, help="worker processes (default: CPU count)")
    p.add_argument("--seed", type=_seed, default=None,
                   help=f"master seed (default: plan file value, else {DEFAULT_SEED})")
    _add_out(p, "run directory")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--desk-scale", dest="profile", action="store_const", const="desk",
                   help="small budgets that finish in minutes (default)")
    g.add_argument("--paper-scale", dest="profile", action="store_const", const="paper",
                   help="full budgets: populations of 200 for 10000 generations")
    p.add_argument("--suite-size", type=_count, metavar="M", help="test cases per suite")
    p.add_argument("--max-loop-iters", type=_count, metavar="N",
                   help="iterations allowed per loop entry")
    p.add_argument("--domain", type=_domain, metavar="LO:HI", help="input value range")

    p = sub.add_parser("report", help="re-render CSVs and figures of a run directory")
    p.add_argument("run_dir", help="directory written by `experiment`")
    return parser


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("SBSTLAB_OUT") or DEFAULT_OUT)


def _load_sut(path: str):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    return parse(p.read_text())


def cmd_gen(args) -> int:
    print(f"seed={args.seed}")
    budget = PROFILES[args.profile]
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(args.count):
        seed = derive_seed(args.seed, "gen", str(args.target.value), i, args.target.kind)
        run = run_ge(GeConfig(args.target, population_size=budget["ge_population"],
                              generations=budget["ge_generations"],
                              input_arity=args.input_arity, seed=seed))
        name = f"prog_{i + 1:02d}"
        text = render(replace(run.program, name=name))
        (out / f"{name}.sut").write_text(text)
        rows.append([f"{name}.sut", args.target.kind, args.target.value, run.achieved,
                     repr(run.fitness), seed, hashlib.sha256(text.encode()).hexdigest()])
        print(f"{name}.sut {args.target.kind}={run.achieved} fitness={run.fitness:g}")
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        w.writerows(rows)
    print(f"wrote {args.count} program(s) to {out}")
    return 0


def _run_single(args, technique: str) -> int:
    program = _load_sut(args.sut)
    print(f"seed={args.seed}")
    budget = PROFILES[args.profile]
    limits = ExecLimits(max_loop_iterations=args.max_loop_iters)
    if technique == "ga":
        outcome = run_ga(program, GaConfig(
            population_size=budget["ga_population"], generations=budget["ga_generations"],
            suite_size=args.suite_size, input_domain=args.domain, criterion=args.criterion,
            seed=args.seed, limits=limits))
    else:
        outcome = run_random(program, RandomConfig(
            trials=budget["random_trials"], suite_size=args.suite_size,
            input_domain=args.domain, criterion=args.criterion, seed=args.seed,
            limits=limits))
    cov = run_suite(program, outcome.best_suite.tolist(), limits)
    print(f"statement_coverage={cov.statement_coverage_pct:.2f}")
    print(f"branch_coverage={cov.branch_coverage_pct:.2f}")
    print(f"evaluations={outcome.evaluations_used}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "suite.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(program.inputs)
            w.writerows(outcome.best_suite.tolist())
        write_trace_csv(cov, out / "trace.csv")
    return 0


def _experiment_plan(args) -> ExperimentPlan:
    values: dict = {}
    if args.plan:
        path = Path(args.plan)
        if not path.is_file():
            raise FileNotFoundError(f"file not found: {args.plan}")
        try:
            base = ExperimentPlan.from_text(path.read_text())
        except PlanError as exc:
            raise PlanError(f"malformed plan {args.plan}: {exc}") from None
    else:
        base = ExperimentPlan.from_profile(args.profile or "desk")
    if args.profile and args.profile != base.profile:
        values.update(PROFILES[args.profile], profile=args.profile)
    if args.seed is not None:
        values["master_seed"] = args.seed
    if args.criterion:
        values["criteria"] = (args.criterion,)
    if args.level:
        values["levels"] = (args.level,)
    if args.domain:
        values["domain_lo"], values["domain_hi"] = args.domain
    for flag, key in (("programs_per_cell", "programs_per_cell"), ("input_arity", "input_arity"),
                      ("suite_size", "suite_size"), ("max_loop_iters", "max_loop_iterations")):
        if getattr(args, flag) is not None:
            values[key] = getattr(args, flag)
    try:
        return replace(base, **values)
    except PlanError as exc:
        raise UsageError(f"sbstlab experiment: {exc}") from None


def cmd_experiment(args) -> int:
    plan = _experiment_plan(args)
    print(f"seed={plan.master_seed}")
    out = _out_dir(args)
    cells = run_experiment(plan, jobs=args.jobs)
    emit_run(cells, plan, out)
    for c in cells:
        status = f" ({c.error})" if c.error else ""
        print(f"{c.criterion:9s} {c.level:6s} target={c.target:<4d} ga={c.ga_mean:6.2f} "
              f"random={c.rnd_mean:6.2f} actual_cl={c.actual_cl:6.2f}{status}")
    print(f"run directory: {out}")
    return 0


def cmd_report(args) -> int:
    cells = report(args.run_dir)
    print(f"re-rendered {len(cells)} cell(s) in {args.run_dir}")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "run-ga": lambda a: _run_single(a, "ga"),
    "run-random": lambda a: _run_single(a, "random"),
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run with --help for usage", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PlanError, SutSyntaxError, SutValidationError, GenerationFailure, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
