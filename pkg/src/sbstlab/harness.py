"""Experiment runner: generate SUTs per cell, test them with GA and random
search, summarize with Welch's t-test and write CSVs and figures.

A cell is one (criterion, level) pair. Every randomized step draws its seed
from :func:`derive_seed`, and results are sorted before emission, so the
output bytes depend only on the plan.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .exec_cov import ExecLimits
from .ge_gen import GeConfig, GenerationFailure, Target, run_ge
from .search import GaConfig, RandomConfig, run_ga, run_random
from .stats import mean_stdev, welch_t_test
from .sut_lang import parse, render

CRITERIA = ("statement", "branch")
LEVELS = ("low", "medium", "high")
TARGET_KIND = {"statement": "statements", "branch": "branches"}

PROFILES = {
    "desk": dict(ge_population=50, ge_generations=200,
                 ga_population=20, ga_generations=50, random_trials=1000),
    "paper": dict(ge_population=200, ge_generations=10000,
                  ga_population=200, ga_generations=10000, random_trials=100000),
}

SUMMARY_HEADER = ["criterion", "level", "target", "ga_mean", "ga_std",
                  "rnd_mean", "rnd_std", "actual_cl"]
PER_PROGRAM_HEADER = ["criterion", "level", "program", "ga_coverage", "rnd_coverage"]
MANIFEST_HEADER = ["file", "targetKind", "targetValue", "achievedValue", "geFitness",
                   "seed", "sha256"]


class PlanError(ValueError):
    pass


def derive_seed(master: int, criterion: str, level: str, index: int, technique: str) -> int:
    """63-bit seed from a SHA-256 of the identifying tuple."""
    key = f"{master}|{criterion}|{level}|{index}|{technique}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def _parse_tuple(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _parse_tuple(text))


@dataclass(frozen=True)
class ExperimentPlan:
    criteria: tuple[str, ...] = CRITERIA
    levels: tuple[str, ...] = LEVELS
    statement_targets: tuple[int, int, int] = (75, 150, 300)
    branch_targets: tuple[int, int, int] = (25, 50, 100)
    programs_per_cell: int = 10
    master_seed: int = 42
    profile: str = "desk"
    ge_population: int = 50
    ge_generations: int = 200
    ga_population: int = 20
    ga_generations: int = 50
    random_trials: int = 1000
    input_arity: int = 5
    suite_size: int = 10
    domain_lo: int = -1_000_000
    domain_hi: int = 1_000_000
    max_loop_iterations: int = 1000
    max_total_steps: int = 1_000_000

    def __post_init__(self):
        problems = []
        if not self.criteria or set(self.criteria) - set(CRITERIA):
            problems.append(f"criteria must be a non-empty subset of {CRITERIA}")
        if not self.levels or set(self.levels) - set(LEVELS):
            problems.append(f"levels must be a non-empty subset of {LEVELS}")
        for name in ("statement_targets", "branch_targets"):
            t = getattr(self, name)
            if len(t) != 3 or not 0 < t[0] < t[1] < t[2]:
                problems.append(f"{name} must be three strictly increasing positive integers")
        if self.programs_per_cell < 2:
            problems.append("programs_per_cell must be >= 2 for the t-test")
        if self.profile not in PROFILES and self.profile != "custom":
            problems.append(f"profile must be one of {sorted(PROFILES)} or custom")
        if self.input_arity < 1 or self.suite_size < 1:
            problems.append("input_arity and suite_size must be >= 1")
        if not self.domain_lo < self.domain_hi:
            problems.append("domain_lo must be < domain_hi")
        if min(self.ge_population, self.ga_population) < 2:
            problems.append("population sizes must be >= 2")
        if min(self.ge_generations, self.ga_generations) < 0 or self.random_trials < 1:
            problems.append("generations must be >= 0 and random_trials >= 1")
        if self.master_seed < 0:
            problems.append("master_seed must be >= 0")
        if problems:
            raise PlanError("; ".join(problems))

    @classmethod
    def from_profile(cls, profile: str = "desk", **overrides) -> "ExperimentPlan":
        if profile not in PROFILES:
            raise PlanError(f"unknown profile {profile!r}")
        return cls(profile=profile, **{**PROFILES[profile], **overrides})

    def target(self, criterion: str, level: str) -> int:
        targets = self.statement_targets if criterion == "statement" else self.branch_targets
        return targets[LEVELS.index(level)]

    def cells(self) -> list[tuple[str, str]]:
        # canonical order, independent of how the plan listed them
        return [(c, lv) for c in CRITERIA if c in self.criteria
                for lv in LEVELS if lv in self.levels]

    @property
    def limits(self) -> ExecLimits:
        return ExecLimits(self.max_loop_iterations, self.max_total_steps)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentPlan":
        """Parse ``key = value`` lines; ``#`` starts a comment.

        A ``profile`` key fills in that profile's budgets first, so explicit
        budget keys still override them.
        """
        kinds = {f.name: f.type for f in fields(cls)}
        raw: dict[str, str] = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise PlanError(f"line {n}: expected key=value, got {line!r}")
            if key not in kinds:
                raise PlanError(f"line {n}: unknown key {key!r}")
            raw[key] = value.strip()
        values: dict = {}
        profile = raw.get("profile", "desk")
        if profile in PROFILES:
            values.update(PROFILES[profile])
        for key, value in raw.items():
            try:
                if key in ("criteria", "levels"):
                    values[key] = _parse_tuple(value.lower())
                elif key.endswith("_targets"):
                    values[key] = _parse_ints(value)
                elif key == "profile":
                    values[key] = value
                else:
                    values[key] = int(value)
            except ValueError:
                raise PlanError(f"bad value for {key}: {value!r}") from None
        return cls(**values)


@dataclass
class ProgramResult:
    criterion: str
    level: str
    index: int
    target: int
    file: str
    sut_text: str
    sha256: str
    ge_seed: int
    achieved: int = -1
    ge_fitness: float = math.inf
    ga_seed: int = 0
    rnd_seed: int = 0
    ga_coverage: float = math.nan
    rnd_coverage: float = math.nan
    ga_evaluations: int = 0
    rnd_evaluations: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class CellSummary:
    criterion: str
    level: str
    target: int
    ga_mean: float
    ga_std: float
    rnd_mean: float
    rnd_std: float
    actual_cl: float
    t: float
    df: float
    p_two_sided: float
    programs: list[ProgramResult] = field(default_factory=list)
    error: str = ""

    @property
    def digest(self) -> str:
        """Hash over the program files both techniques consumed."""
        h = hashlib.sha256()
        for p in self.programs:
            h.update(p.sha256.encode())
        return h.hexdigest()


def sut_file_name(criterion: str, level: str, index: int) -> str:
    return f"{criterion}-{level}-{index + 1:02d}.sut"


def run_program(plan: ExperimentPlan, criterion: str, level: str, index: int) -> ProgramResult:
    """Generate one SUT, then test its rendered text with both techniques."""
    target = plan.target(criterion, level)
    name = sut_file_name(criterion, level, index)
    ge_seed = derive_seed(plan.master_seed, criterion, level, index, "ge")
    res = ProgramResult(criterion, level, index, target, name, "", "", ge_seed)
    ge = GeConfig(Target(TARGET_KIND[criterion], target),
                  population_size=plan.ge_population, generations=plan.ge_generations,
                  input_arity=plan.input_arity, seed=ge_seed)
    try:
        run = run_ge(ge)
    except GenerationFailure as exc:
        res.error = str(exc)
        return res
    text = render(replace(run.program, name=name[:-4].replace("-", "_")))
    res.sut_text = text
    res.sha256 = hashlib.sha256(text.encode()).hexdigest()
    res.achieved, res.ge_fitness = run.achieved, run.fitness

    # both techniques see the program exactly as written to disk
    program = parse(text)
    domain = (plan.domain_lo, plan.domain_hi)
    res.ga_seed = derive_seed(plan.master_seed, criterion, level, index, "ga")
    res.rnd_seed = derive_seed(plan.master_seed, criterion, level, index, "random")
    ga = run_ga(program, GaConfig(
        population_size=plan.ga_population, generations=plan.ga_generations,
        suite_size=plan.suite_size, input_domain=domain, criterion=criterion,
        seed=res.ga_seed, limits=plan.limits))
    rnd = run_random(program, RandomConfig(
        trials=plan.random_trials, suite_size=plan.suite_size, input_domain=domain,
        criterion=criterion, seed=res.rnd_seed, limits=plan.limits))
    res.ga_coverage, res.ga_evaluations = ga.best_coverage_pct, ga.evaluations_used
    res.rnd_coverage, res.rnd_evaluations = rnd.best_coverage_pct, rnd.evaluations_used
    return res


def _run_task(args) -> ProgramResult:
    return run_program(*args)


def summarize(criterion: str, level: str, target: int,
              programs: list[ProgramResult]) -> CellSummary:
    """Cell statistics over the programs that completed."""
    programs = sorted(programs, key=lambda p: p.index)
    ok = [p for p in programs if p.ok]
    nan = math.nan
    if len(ok) < 2:
        return CellSummary(criterion, level, target, nan, nan, nan, nan, nan, nan, nan, nan,
                           programs, error=f"only {len(ok)} program(s) completed")
    ga = [p.ga_coverage for p in ok]
    rnd = [p.rnd_coverage for p in ok]
    gm, gs = mean_stdev(ga)
    rm, rs = mean_stdev(rnd)
    tt = welch_t_test(ga, rnd)
    return CellSummary(criterion, level, target, gm, gs, rm, rs, tt.actual_cl,
                       tt.t, tt.df, tt.p_two_sided, programs)


def run_experiment(plan: ExperimentPlan, jobs: int | None = None) -> list[CellSummary]:
    tasks = [(plan, c, lv, i) for c, lv in plan.cells() for i in range(plan.programs_per_cell)]
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_task, tasks))
    results.sort(key=lambda r: (CRITERIA.index(r.criterion), LEVELS.index(r.level), r.index))
    return [summarize(c, lv, plan.target(c, lv),
                      [r for r in results if (r.criterion, r.level) == (c, lv)])
            for c, lv in plan.cells()]


# ---------------------------------------------------------------------------
# output


def _f2(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.2f}"


def _full(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_csv(cells: list[CellSummary], run_dir: str | Path) -> list[Path]:
    """summary.csv and per_program.csv at two decimals plus full-precision
    ``*_raw.csv`` twins."""
    if not cells:
        raise ValueError("no results to emit")
    out = Path(run_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        _write_csv(out / "summary.csv", SUMMARY_HEADER, (
            [c.criterion, c.level, c.target, _f2(c.ga_mean), _f2(c.ga_std),
             _f2(c.rnd_mean), _f2(c.rnd_std), _f2(c.actual_cl)] for c in cells)),
        _write_csv(out / "summary_raw.csv",
                   SUMMARY_HEADER + ["t", "df", "p_two_sided", "n", "programs_sha256", "error"], (
            [c.criterion, c.level, c.target, _full(c.ga_mean), _full(c.ga_std),
             _full(c.rnd_mean), _full(c.rnd_std), _full(c.actual_cl), _full(c.t),
             _full(c.df), _full(c.p_two_sided), sum(p.ok for p in c.programs),
             c.digest, c.error] for c in cells)),
        _write_csv(out / "per_program.csv", PER_PROGRAM_HEADER, (
            [p.criterion, p.level, p.file, _f2(p.ga_coverage), _f2(p.rnd_coverage)]
            for c in cells for p in c.programs)),
        _write_csv(out / "per_program_raw.csv",
                   PER_PROGRAM_HEADER + ["target", "sha256", "ge_seed", "ga_seed", "rnd_seed",
                                         "error"], (
            [p.criterion, p.level, p.file, _full(p.ga_coverage), _full(p.rnd_coverage),
             p.target, p.sha256, p.ge_seed, p.ga_seed, p.rnd_seed, p.error]
            for c in cells for p in c.programs)),
    ]
    return written


def emit_run(cells: list[CellSummary], plan: ExperimentPlan, run_dir: str | Path) -> Path:
    """Write the complete run directory."""
    out = Path(run_dir)
    suts = out / "suts"
    suts.mkdir(parents=True, exist_ok=True)
    programs = [p for c in cells for p in c.programs]
    for p in programs:
        if p.ok:
            (suts / p.file).write_text(p.sut_text)
    (out / "plan.txt").write_text(plan.to_text())
    _write_csv(out / "manifest.csv", MANIFEST_HEADER, (
        [f"suts/{p.file}", TARGET_KIND[p.criterion], p.target, p.achieved,
         _full(p.ge_fitness), p.ge_seed, p.sha256] for p in programs if p.ok))
    ga_budget = plan.ga_population * (plan.ga_generations + 1)
    _write_csv(out / "runs.csv",
               ["program", "technique", "criterion", "level", "seed", "budget", "evaluations",
                "bestCoveragePct"],
               ([p.file, tech, p.criterion, p.level, seed, budget, ev, _full(cov)]
                for p in programs if p.ok
                for tech, seed, budget, ev, cov in (
                    ("ga", p.ga_seed, ga_budget, p.ga_evaluations, p.ga_coverage),
                    ("random", p.rnd_seed, plan.random_trials, p.rnd_evaluations,
                     p.rnd_coverage))))
    emit_csv(cells, out)
    emit_figures(cells, out)
    return out


def cell_figure(cell: CellSummary):
    """Grouped bars per program: GA then random, coverage on a 0-100 axis."""
    from matplotlib.figure import Figure

    ok = [p for p in cell.programs if p.ok]
    xs = list(range(1, len(ok) + 1))
    width = 0.38
    fig = Figure(figsize=(max(4.0, 0.6 * len(xs) + 2), 3.2))
    ax = fig.add_subplot()
    ax.bar([x - width / 2 for x in xs], [p.ga_coverage for p in ok], width, label="GA",
           color="#3b6ea8")
    ax.bar([x + width / 2 for x in xs], [p.rnd_coverage for p in ok], width, label="Random",
           color="#d08a3a")
    ax.set_xticks(xs)
    ax.set_ylim(0, 100)
    ax.set_xlabel("program")
    ax.set_ylabel(f"{cell.criterion} coverage (%)")
    ax.set_title(f"GA vs Random, {cell.level} complexity ({cell.criterion})")
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    return fig


def emit_figures(cells: list[CellSummary], run_dir: str | Path) -> list[Path]:
    import matplotlib

    if not cells:
        raise ValueError("no results to plot")
    fig_dir = Path(run_dir) / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    # fixed salt and no date so the SVG bytes are reproducible
    with matplotlib.rc_context({"svg.hashsalt": "sbstlab", "svg.fonttype": "path"}):
        for cell in cells:
            path = fig_dir / f"{cell.criterion}_{cell.level}.svg"
            cell_figure(cell).savefig(path, format="svg", metadata={"Date": None})
            paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# report


def load_cells(run_dir: str | Path) -> list[CellSummary]:
    """Rebuild cell summaries from ``per_program_raw.csv``."""
    path = Path(run_dir) / "per_program_raw.csv"
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    groups: dict[tuple[str, str], list[ProgramResult]] = {}
    targets: dict[tuple[str, str], int] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["criterion"], row["level"])
            index = int(row["program"].rsplit("-", 1)[1].split(".")[0]) - 1
            targets[key] = int(row["target"])
            groups.setdefault(key, []).append(ProgramResult(
                row["criterion"], row["level"], index, int(row["target"]), row["program"],
                "", row["sha256"], int(row["ge_seed"]), ga_seed=int(row["ga_seed"]),
                rnd_seed=int(row["rnd_seed"]), ga_coverage=float(row["ga_coverage"]),
                rnd_coverage=float(row["rnd_coverage"]), error=row["error"]))
    keys = sorted(groups, key=lambda k: (CRITERIA.index(k[0]), LEVELS.index(k[1])))
    return [summarize(k[0], k[1], targets[k], groups[k]) for k in keys]


def report(run_dir: str | Path) -> list[CellSummary]:
    """Re-render the summary CSVs and figures of an existing run."""
    cells = load_cells(run_dir)
    emit_csv(cells, run_dir)
    emit_figures(cells, run_dir)
    return cells
