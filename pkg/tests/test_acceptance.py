"""Acceptance criteria 1-7, one test each.

Every test records a PASS/FAIL line (printed in the terminal summary by
conftest) before asserting, so a failing criterion still reports its numbers.
"""

import csv
import itertools
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracle import random_program, walk_run
from conftest import ACCEPTANCE
from sbstlab.exec_cov import branch_distance, execute, run_suite
from sbstlab.ge_gen import GeConfig, Target, run_ge
from sbstlab.search import GaConfig, roulette_sample, run_ga, suite_fitness
from sbstlab.stats import t_cdf, t_cdf_closed_form, welch_t_test
from sbstlab.sut_lang import validate

scipy_stats = pytest.importorskip("scipy.stats")


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_1_branch_distance_table():
    t0 = time.perf_counter()
    cases = [
        ("<", 3, 5, True, 0), ("<", 5, 3, True, 3), ("<", 3, 5, False, 2),
        ("<=", 3, 3, True, 0), ("<=", 5, 3, True, 2), ("<=", 3, 3, False, 1),
        (">", 5, 3, True, 0), (">", 3, 5, True, 3), (">", 5, 5, False, 0),
        (">=", 20, 15, True, 0), (">=", 10, 15, True, 5), (">=", 5, 5, False, 1),
        ("==", 4, 4, True, 0), ("==", 7, 3, True, 4), ("==", 7, 3, False, 0),
        ("!=", 7, 3, True, 0), ("!=", 4, 4, True, 1), ("!=", 4, 1, False, 3),
    ]
    wrong = [c for c in cases if branch_distance(c[0], c[1], c[2], c[3]) != c[4]]
    elapsed = time.perf_counter() - t0
    record(1, not wrong and elapsed < 1.0,
           f"{len(cases) - len(wrong)}/{len(cases)} exact, {elapsed * 1000:.1f} ms")


def test_criterion_2_interpreter_oracle_equivalence():
    t0 = time.perf_counter()
    grid = list(itertools.product(range(-10, 11), repeat=2))
    mismatches = 0
    for seed in range(100):
        p = random_program(1000 + seed, arity=2, max_branches=3)
        assert p.metrics.branches <= 3 and not validate(p)
        expected = set()
        for case in grid:
            expected |= walk_run(p, case)[1]
        got = run_suite(p, grid).covered_outcomes
        per_case = all(execute(p, c).covered_outcomes == walk_run(p, c)[1] for c in grid[::20])
        mismatches += (got != expected) or not per_case
    elapsed = time.perf_counter() - t0
    record(2, mismatches == 0 and elapsed < 120,
           f"{100 - mismatches}/100 programs match the enumeration oracle, {elapsed:.1f} s")


@pytest.mark.parametrize("target", ["statements=75", "branches=25"])
def test_criterion_3_ge_targeting(target):
    t0 = time.perf_counter()
    tgt = Target.parse(target)
    hits = valid = 0
    for seed in range(10):
        run = run_ge(GeConfig(tgt, population_size=50, generations=200, seed=seed))
        value = tgt.metric(run.program.metrics)
        hits += abs(value - tgt.value) <= 0.05 * tgt.value
        valid += not validate(run.program)
    elapsed = time.perf_counter() - t0
    ok = hits >= 9 and valid == 10 and elapsed < 120
    prev = ACCEPTANCE.get(3)
    detail = f"{target}: {hits}/10 within 5%, {valid}/10 valid, {elapsed:.1f} s"
    if prev is not None:
        ok, detail = ok and prev[0], prev[1] + "; " + detail
    record(3, ok, detail)


def _experiment(out):
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "sbstlab", "experiment", "--seed", "42",
                           "--desk-scale", "--out", str(out)],
                          capture_output=True, text=True, timeout=1800)
    assert proc.returncode == 0, proc.stderr
    return time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("desk_a"), tmp_path_factory.mktemp("desk_b")
    return (a, _experiment(a)), (b, _experiment(b))


def test_criterion_4_directional_reproduction(desk_runs):
    (run, elapsed), _ = desk_runs
    with open(run / "summary_raw.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    wins = {"statement": 0, "branch": 0}
    parts = []
    for r in rows:
        ga, rnd = float(r["ga_mean"]), float(r["rnd_mean"])
        wins[r["criterion"]] += ga >= rnd
        parts.append(f"{r['criterion'][0]}/{r['level']} {ga:.2f}>={rnd:.2f}"
                     if ga >= rnd else f"{r['criterion'][0]}/{r['level']} {ga:.2f}<{rnd:.2f}")
    ok = wins["branch"] == 3 and wins["statement"] >= 2 and elapsed < 15 * 60
    record(4, ok, f"branch {wins['branch']}/3, statement {wins['statement']}/3, "
                  f"{elapsed / 60:.1f} min [{'; '.join(parts)}]")


def test_criterion_5_statistics_oracle():
    t0 = time.perf_counter()
    datasets = [
        ([95, 96, 97], [93, 94, 95]),
        ([98.5, 92.1, 100.0, 96.7, 99.2, 94.4, 97.8, 95.0, 100.0, 93.3],
         [88.1, 91.4, 85.0, 90.2, 79.9, 86.6, 92.3, 84.7, 88.8, 81.0]),
        ([60.0, 72.5, 65.1, 70.0, 58.3], [61.2, 66.0, 80.1, 55.5, 70.4, 68.8, 59.9]),
    ]
    worst = 0.0
    for a, b in datasets:
        ours = welch_t_test(a, b)
        ref = scipy_stats.ttest_ind(a, b, equal_var=False)
        va, vb = np.var(a, ddof=1) / len(a), np.var(b, ddof=1) / len(b)
        df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
        worst = max(worst, abs(ours.t - ref.statistic), abs(ours.df - df),
                    abs(ours.p_two_sided - ref.pvalue))
    closed = max(abs(t_cdf(t, df) - t_cdf_closed_form(t, df))
                 for df in (1, 2) for t in np.linspace(-20, 20, 81))
    elapsed = time.perf_counter() - t0
    record(5, worst < 1e-6 and closed < 1e-9 and elapsed < 1.0,
           f"max |t,df,p error| {worst:.1e}, closed-form error {closed:.1e}, "
           f"{elapsed * 1000:.0f} ms")


def test_criterion_6_determinism(desk_runs):
    (a, _), (b, _) = desk_runs
    same = {n: (a / n).read_bytes() == (b / n).read_bytes()
            for n in ("summary.csv", "per_program.csv", "manifest.csv")}
    record(6, all(same.values()),
           ", ".join(f"{n} {'identical' if s else 'DIFFERS'}" for n, s in same.items()))


cases = st.lists(st.tuples(st.integers(-15, 15), st.integers(-15, 15)), min_size=1, max_size=5)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000), cases, cases)
def _monotone(seed, suite, extra):
    p = random_program(seed, max_branches=4)
    s, b = run_suite(p, suite), run_suite(p, suite + extra)
    assert s.covered_outcomes <= b.covered_outcomes
    assert s.executed_stmt_ids <= b.executed_stmt_ids


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(["statement", "branch"]), cases, cases)
def _dominance(seed, criterion, suite, extra):
    p = random_program(seed, max_branches=4)
    s, b = run_suite(p, suite), run_suite(p, suite + extra)
    key = "executed_stmt_ids" if criterion == "statement" else "covered_outcomes"
    if getattr(s, key) < getattr(b, key):
        assert suite_fitness(p, suite + extra, criterion) > suite_fitness(p, suite, criterion)


def _elitism():
    for seed in range(3):
        sut = run_ge(GeConfig(Target("branches", 25), population_size=50, generations=200,
                              seed=seed)).program
        h = run_ga(sut, GaConfig(population_size=20, generations=50, seed=seed)).history
        assert all(y >= x for x, y in zip(h, h[1:]))


def _roulette():
    rng = np.random.default_rng(2024)
    assert set(roulette_sample([1, 0, 0], 10_000, rng).tolist()) == {0}
    assert abs(roulette_sample([0, 0], 10_000, rng).mean() - 0.5) <= 0.02
    assert abs(roulette_sample([1, 3], 10_000, rng).mean() - 0.75) <= 0.02


def test_criterion_7_property_suites():
    results = {}
    for name, check in (("monotonicity", _monotone), ("dominance", _dominance),
                        ("elitism", _elitism), ("roulette", _roulette)):
        try:
            check()
            results[name] = True
        except AssertionError:
            results[name] = False
    record(7, all(results.values()),
           ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in results.items()))
