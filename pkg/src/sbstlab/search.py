"""Test-data search: a genetic algorithm over test suites and random testing.

An individual is a whole suite of ``m`` test cases (shape ``m x k``). Suite
fitness is the number of covered units plus a guidance term below one that
rewards small branch distances on outcomes not yet covered, so coverage always
dominates and distance only breaks ties between equally covering suites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exec_cov import BatchCoverage, ExecLimits, run_suite, run_suites
from .sut_lang import Program

CRITERIA = ("statement", "branch")
DEFAULT_DOMAIN = (-1_000_000, 1_000_000)

__all__ = [
    "GaConfig",
    "RandomConfig",
    "SearchOutcome",
    "roulette_sample",
    "roulette_select",
    "run_ga",
    "run_random",
    "suite_fitness",
]


def roulette_select(weights, rng: np.random.Generator) -> int:
    """Fitness-proportionate choice of an index; uniform when all weights are 0."""
    return int(roulette_sample(weights, 1, rng)[0])


def roulette_sample(weights, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent roulette draws over non-negative ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("weights must be non-empty")
    total = w.sum()
    if not total > 0:
        return rng.integers(w.size, size=n)
    idx = np.searchsorted(np.cumsum(w), rng.random(n) * total, side="right")
    return np.minimum(idx, w.size - 1)


def _check_common(criterion: str, domain: tuple[int, int], suite_size: int) -> None:
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if not domain[0] < domain[1]:
        raise ValueError("input domain must satisfy low < high")
    if suite_size < 1:
        raise ValueError("suite_size must be >= 1")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 200
    generations: int = 10000
    suite_size: int = 10
    input_domain: tuple[int, int] = DEFAULT_DOMAIN
    crossover_rate: float = 0.9
    mutation_rate: float = 0.02
    elitism: int = 1
    criterion: str = "branch"
    seed: int = 0
    limits: ExecLimits = ExecLimits()
    # share of mutations that shift the value by a log-uniform step instead
    # of resampling it; 0 gives pure uniform resampling
    creep_share: float = 0.0
    # subtract the worst fitness before roulette selection
    window: bool = False

    def __post_init__(self):
        _check_common(self.criterion, self.input_domain, self.suite_size)
        if not 0.0 <= self.creep_share <= 1.0:
            raise ValueError("creep_share must lie in [0, 1]")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must be in [0, population_size)")
        for r in (self.crossover_rate, self.mutation_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")

    @property
    def budget(self) -> int:
        return self.population_size * (self.generations + 1)


@dataclass(frozen=True)
class RandomConfig:
    trials: int = 100_000
    suite_size: int = 10
    input_domain: tuple[int, int] = DEFAULT_DOMAIN
    criterion: str = "branch"
    seed: int = 0
    limits: ExecLimits = ExecLimits()
    chunk: int = 256

    def __post_init__(self):
        _check_common(self.criterion, self.input_domain, self.suite_size)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def budget(self) -> int:
        return self.trials


@dataclass
class SearchOutcome:
    best_suite: np.ndarray  # (m, k) int64
    best_coverage_pct: float
    evaluations_used: int
    history: list[float] = field(default_factory=list)  # best coverage per generation
    best_fitness: float = 0.0


def _units(program: Program, criterion: str) -> int:
    m = program.metrics
    return m.statements if criterion == "statement" else 2 * m.branches


def _score(program: Program, cov: BatchCoverage, criterion: str) -> tuple[np.ndarray, np.ndarray]:
    """(fitness, coverage pct) for each suite in a batch."""
    from .exec_cov import compile_program

    weights = compile_program(program).outcome_weights
    hit = cov.stmt_hit if criterion == "statement" else cov.out_hit
    covered = hit.sum(axis=1, dtype=np.int64).astype(np.float64)
    uncovered = cov.out_hit == 0
    n_uncovered = uncovered.sum(axis=1)
    reached = cov.dist >= 0
    d = np.where(reached, cov.dist, 0).astype(np.float64)
    if criterion == "statement":
        d = d / weights
    terms = np.where(uncovered & reached, 1.0 / (1.0 + d), 0.0)
    guidance = np.divide(terms.sum(axis=1), n_uncovered,
                         out=np.zeros(len(covered)), where=n_uncovered > 0)
    units = _units(program, criterion)
    pct = np.full(len(covered), 100.0) if units == 0 else 100.0 * covered / units
    return covered + guidance, pct


def suite_fitness(program: Program, suite, criterion: str = "branch",
                  limits: ExecLimits = ExecLimits()) -> float:
    """Covered units plus distance guidance in ``[0, 1)``; higher is better."""
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    suites = np.asarray(suite, dtype=np.int64).reshape(1, -1, program.input_arity)
    fitness, _ = _score(program, run_suites(program, suites, limits), criterion)
    return float(fitness[0])


def _sample(rng: np.random.Generator, domain: tuple[int, int], shape) -> np.ndarray:
    return rng.integers(domain[0], domain[1], size=shape, endpoint=True, dtype=np.int64)


def _mutate(kids: np.ndarray, config: GaConfig, rng: np.random.Generator) -> None:
    mask = rng.random(kids.shape) < config.mutation_rate
    n = int(mask.sum())
    if not n:
        return
    lo, hi = config.input_domain
    fresh = _sample(rng, config.input_domain, n)
    if config.creep_share > 0:
        creep = rng.random(n) < config.creep_share
        # step magnitude log-uniform in [1, hi - lo]
        mag = np.floor(np.exp(rng.random(n) * np.log(float(hi - lo)))).astype(np.int64)
        sign = np.where(rng.random(n) < 0.5, -1, 1)
        shifted = np.clip(kids[mask] + sign * mag, lo, hi)
        fresh = np.where(creep, shifted, fresh)
    kids[mask] = fresh


def run_ga(program: Program, config: GaConfig) -> SearchOutcome:
    """Generational GA with roulette selection, one-point crossover between
    test cases, per-value mutation and elitism."""
    rng = np.random.default_rng(config.seed)
    n, m, k = config.population_size, config.suite_size, program.input_arity
    crit, limits = config.criterion, config.limits

    pop = _sample(rng, config.input_domain, (n, m, k))
    fit, pct = _score(program, run_suites(program, pop, limits), crit)
    evaluations = n
    b = int(np.argmax(fit))
    best_suite, best_fit, best_pct = pop[b].copy(), float(fit[b]), float(pct[b])
    history = [best_pct]

    n_elite = config.elitism
    n_kids = n - n_elite
    for _ in range(config.generations):
        elite = np.argsort(-fit, kind="stable")[:n_elite]
        weights = fit - fit.min() if config.window else fit
        parents = roulette_sample(weights, 2 * ((n_kids + 1) // 2), rng)
        kids = np.empty((2 * ((n_kids + 1) // 2), m, k), dtype=np.int64)
        for j in range(0, len(parents), 2):
            a, c = pop[parents[j]], pop[parents[j + 1]]
            if m > 1 and rng.random() < config.crossover_rate:
                cut = int(rng.integers(1, m))
                kids[j] = np.concatenate((a[:cut], c[cut:]))
                kids[j + 1] = np.concatenate((c[:cut], a[cut:]))
            else:
                kids[j] = a
                kids[j + 1] = c
        kids = kids[:n_kids]
        _mutate(kids, config, rng)
        kid_fit, kid_pct = _score(program, run_suites(program, kids, limits), crit)
        evaluations += n_kids
        pop = np.concatenate((pop[elite], kids))
        fit = np.concatenate((fit[elite], kid_fit))
        pct = np.concatenate((pct[elite], kid_pct))
        g = int(np.argmax(fit))
        if fit[g] > best_fit:
            best_suite, best_fit, best_pct = pop[g].copy(), float(fit[g]), float(pct[g])
        history.append(best_pct)
    return SearchOutcome(best_suite, best_pct, evaluations, history, best_fit)


def run_random(program: Program, config: RandomConfig) -> SearchOutcome:
    """Sample ``trials`` uniform suites and keep the best covering one."""
    rng = np.random.default_rng(config.seed)
    m, k = config.suite_size, program.input_arity
    best_suite, best_pct, best_fit = None, -1.0, 0.0
    history = []
    done = 0
    while done < config.trials:
        size = min(config.chunk, config.trials - done)
        suites = _sample(rng, config.input_domain, (size, m, k))
        fit, pct = _score(program, run_suites(program, suites, config.limits), config.criterion)
        j = int(np.argmax(pct))
        if pct[j] > best_pct:
            best_suite, best_pct, best_fit = suites[j].copy(), float(pct[j]), float(fit[j])
        history.append(best_pct)
        done += size
    return SearchOutcome(best_suite, best_pct, config.trials, history, best_fit)


def coverage_of(program: Program, suite, criterion: str,
                limits: ExecLimits = ExecLimits()) -> float:
    """Coverage percentage of ``suite`` under ``criterion``, via run_suite."""
    return run_suite(program, np.asarray(suite).reshape(-1, program.input_arity),
                     limits).coverage_pct(criterion)
