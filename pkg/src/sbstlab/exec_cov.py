"""Instrumented execution of programs on test cases.

Programs are compiled once to a flat bytecode and run by the kernel picked in
:mod:`sbstlab._kernel`. Every condition evaluation marks the taken outcome as
covered and records, for the untaken outcome, the branch distance: a
non-negative cost that is zero exactly when the outcome would be taken.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernel
from . import _pykernel as K
from .sut_lang import (
    RELS,
    Assign,
    BinOp,
    Cond,
    Const,
    If,
    Loop,
    Program,
    Var,
    block_statement_count,
    walk,
)

DIST_MAX = K.DIST_MAX
TestCase = tuple[int, ...]


class Termination(enum.Enum):
    NORMAL = "normal"
    OVERFLOW_HALT = "overflowHalt"
    STEP_LIMIT = "stepLimit"


_TERMS = {
    K.TERM_NORMAL: Termination.NORMAL,
    K.TERM_OVERFLOW: Termination.OVERFLOW_HALT,
    K.TERM_STEPS: Termination.STEP_LIMIT,
}


class ArityError(ValueError):
    pass


@dataclass(frozen=True)
class ExecLimits:
    max_loop_iterations: int = 1000
    max_total_steps: int = 1_000_000

    def __post_init__(self):
        if self.max_loop_iterations < 1 or self.max_total_steps < 1:
            raise ValueError("execution limits must be >= 1")


@dataclass(frozen=True)
class TraceResult:
    executed_stmt_ids: frozenset[int]
    covered_outcomes: frozenset[tuple[int, bool]]
    distances: dict[tuple[int, bool], int]
    termination: Termination


@dataclass(frozen=True)
class CoverageReport:
    statement_coverage_pct: float
    branch_coverage_pct: float
    executed_stmt_ids: frozenset[int]
    covered_outcomes: frozenset[tuple[int, bool]]
    min_distances: dict[tuple[int, bool], int]
    terminations: tuple[Termination, ...] = ()

    def coverage_pct(self, criterion: str) -> float:
        if criterion == "statement":
            return self.statement_coverage_pct
        if criterion == "branch":
            return self.branch_coverage_pct
        raise ValueError(f"unknown criterion {criterion!r}")


def branch_distance(cond: Cond | str, left: int, right: int, desired: bool) -> int:
    """Distance of ``left rel right`` from evaluating to ``desired``.

    Computed exactly on Python integers and saturated at ``DIST_MAX``.
    """
    rel = RELS.index(cond.rel if isinstance(cond, Cond) else cond)
    if not desired:
        rel = K.NEGATED[rel]
    return K.distance(rel, int(left), int(right))


# ---------------------------------------------------------------------------
# compilation


@dataclass(frozen=True)
class Compiled:
    code: np.ndarray
    n_slots: int
    n_loops: int
    stack_size: int
    n_stmts: int
    n_branches: int
    arity: int
    # statements governed by each outcome, index 2*branch_id (+1 for false)
    outcome_weights: np.ndarray


class _Compiler:
    def __init__(self, program: Program):
        self.code: list[int] = []
        self.slots = {name: i for i, name in enumerate(program.inputs)}
        self.n_loops = 0
        self.max_depth = 0

    def slot(self, name: str) -> int:
        if name not in self.slots:
            self.slots[name] = len(self.slots)
        return self.slots[name]

    def expr(self, e, depth: int) -> None:
        if isinstance(e, Const):
            self.code += [K.OP_CONST, e.value]
            self.max_depth = max(self.max_depth, depth + 1)
        elif isinstance(e, Var):
            self.code += [K.OP_LOAD, self.slot(e.name)]
            self.max_depth = max(self.max_depth, depth + 1)
        elif isinstance(e, BinOp):
            self.expr(e.left, depth)
            self.expr(e.right, depth + 1)
            self.code.append(K.OP_ADD + "+-*".index(e.op))
        else:
            raise TypeError(f"not an expression: {e!r}")

    def cond(self, c: Cond) -> None:
        self.expr(c.left, 0)
        self.expr(c.right, 1)
        self.code += [K.OP_COND, RELS.index(c.rel), c.branch_id]

    def hole(self) -> int:
        self.code.append(-1)
        return len(self.code) - 1

    def block(self, stmts) -> None:
        for s in stmts:
            if isinstance(s, Assign):
                self.code += [K.OP_STMT, s.stmt_id]
                self.expr(s.value, 0)
                self.code += [K.OP_STORE, self.slot(s.target)]
            elif isinstance(s, If):
                self.cond(s.cond)
                self.code.append(K.OP_JF)
                to_else = self.hole()
                self.block(s.then)
                if s.orelse is not None:
                    self.code.append(K.OP_JMP)
                    to_end = self.hole()
                    self.code[to_else] = len(self.code)
                    self.block(s.orelse)
                    self.code[to_end] = len(self.code)
                else:
                    self.code[to_else] = len(self.code)
            elif isinstance(s, Loop):
                li = self.n_loops
                self.n_loops += 1
                self.code += [K.OP_LOOP_RESET, li]
                head = len(self.code)
                self.code += [K.OP_LOOP_GUARD, li]
                guard_exit = self.hole()
                self.cond(s.cond)
                self.code.append(K.OP_JF)
                cond_exit = self.hole()
                self.code += [K.OP_LOOP_COUNT, li]
                self.block(s.body)
                self.code += [K.OP_JMP, head]
                self.code[guard_exit] = self.code[cond_exit] = len(self.code)
            else:
                raise TypeError(f"not a statement: {s!r}")


def compile_program(program: Program) -> Compiled:
    """Bytecode for ``program``; cached on the program object."""
    cached = program.__dict__.get("_compiled")
    if cached is not None:
        return cached
    comp = _Compiler(program)
    comp.block(program.body)
    comp.code.append(K.OP_HALT)
    m = program.metrics
    n_stmt_ids = max((s.stmt_id for s in walk(program.body) if isinstance(s, Assign)), default=-1) + 1
    n_branch_ids = max(
        (s.cond.branch_id for s in walk(program.body) if isinstance(s, (If, Loop))),
        default=-1,
    ) + 1
    n_branches = max(n_branch_ids, m.branches)
    weights = np.ones(2 * n_branches, dtype=np.float64)
    for s in walk(program.body):
        if isinstance(s, If):
            b = s.cond.branch_id
            weights[2 * b] = max(1, block_statement_count(s.then))
            weights[2 * b + 1] = max(1, block_statement_count(s.orelse))
        elif isinstance(s, Loop):
            weights[2 * s.cond.branch_id] = max(1, block_statement_count(s.body))
    compiled = Compiled(
        code=np.asarray(comp.code, dtype=np.int64),
        n_slots=len(comp.slots),
        n_loops=comp.n_loops,
        stack_size=comp.max_depth + 2,
        n_stmts=max(n_stmt_ids, m.statements),
        n_branches=n_branches,
        arity=program.input_arity,
        outcome_weights=weights,
    )
    object.__setattr__(program, "_compiled", compiled)
    return compiled


# ---------------------------------------------------------------------------
# execution


def _as_inputs(program: Program, test_case) -> np.ndarray:
    arr = np.ascontiguousarray(test_case, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != program.input_arity:
        raise ArityError(
            f"test case has {arr.size} inputs, program expects {program.input_arity}"
        )
    return arr


def _outcome_sets(out_hit, dist):
    covered = frozenset(
        (i // 2, i % 2 == 0) for i in np.flatnonzero(np.asarray(out_hit)).tolist()
    )
    distances = {
        (i // 2, i % 2 == 0): int(d) for i, d in enumerate(np.asarray(dist).tolist()) if d >= 0
    }
    return covered, distances


def execute(program: Program, test_case, limits: ExecLimits = ExecLimits()) -> TraceResult:
    """Run one test case and return its trace."""
    c = compile_program(program)
    inputs = _as_inputs(program, test_case)
    stmt_hit = np.zeros(c.n_stmts, dtype=np.uint8)
    out_hit = np.zeros(2 * c.n_branches, dtype=np.uint8)
    dist = np.full(2 * c.n_branches, -1, dtype=np.int64)
    term = _kernel.run_case(
        c.code, inputs, c.n_slots, c.n_loops, c.stack_size,
        limits.max_loop_iterations, limits.max_total_steps, stmt_hit, out_hit, dist,
    )
    covered, distances = _outcome_sets(out_hit, dist)
    return TraceResult(
        executed_stmt_ids=frozenset(np.flatnonzero(stmt_hit).tolist()),
        covered_outcomes=covered,
        distances=distances,
        termination=_TERMS[int(term)],
    )


def _pct(hit: int, total: int) -> float:
    return 100.0 if total == 0 else 100.0 * hit / total


def run_suite(program: Program, suite: Sequence, limits: ExecLimits = ExecLimits()) -> CoverageReport:
    """Merged coverage of a non-empty suite of test cases."""
    c = compile_program(program)
    inputs = np.ascontiguousarray(suite, dtype=np.int64)
    if inputs.ndim == 1 and program.input_arity == 0:
        inputs = inputs.reshape(len(suite), 0)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("suite must be a non-empty sequence of test cases")
    if inputs.shape[1] != program.input_arity:
        raise ArityError(
            f"test case has {inputs.shape[1]} inputs, program expects {program.input_arity}"
        )
    stmt_hit = np.zeros(c.n_stmts, dtype=np.uint8)
    out_hit = np.zeros(2 * c.n_branches, dtype=np.uint8)
    dist = np.full(2 * c.n_branches, -1, dtype=np.int64)
    terms = np.zeros(inputs.shape[0], dtype=np.int64)
    _kernel.run_suite(
        c.code, inputs, c.n_slots, c.n_loops, c.stack_size,
        limits.max_loop_iterations, limits.max_total_steps, stmt_hit, out_hit, dist, terms,
    )
    covered, distances = _outcome_sets(out_hit, dist)
    executed = frozenset(np.flatnonzero(stmt_hit).tolist())
    m = program.metrics
    return CoverageReport(
        statement_coverage_pct=_pct(len(executed), m.statements),
        branch_coverage_pct=_pct(len(covered), 2 * m.branches),
        executed_stmt_ids=executed,
        covered_outcomes=covered,
        min_distances=distances,
        terminations=tuple(_TERMS[int(t)] for t in terms),
    )


@dataclass
class BatchCoverage:
    """Per-suite coverage arrays for a batch of suites."""

    stmt_hit: np.ndarray  # (suites, n_stmts) uint8
    out_hit: np.ndarray  # (suites, 2*n_branches) uint8
    dist: np.ndarray  # (suites, 2*n_branches) int64, -1 = never reached


def run_suites(program: Program, suites: np.ndarray, limits: ExecLimits = ExecLimits()) -> BatchCoverage:
    """Coverage of many suites at once; ``suites`` has shape (n, m, k)."""
    c = compile_program(program)
    inputs = np.ascontiguousarray(suites, dtype=np.int64)
    if inputs.ndim != 3 or inputs.shape[2] != program.input_arity:
        raise ArityError(f"suites must have shape (n, m, {program.input_arity})")
    n = inputs.shape[0]
    stmt_cov = np.zeros((n, c.n_stmts), dtype=np.uint8)
    out_cov = np.zeros((n, 2 * c.n_branches), dtype=np.uint8)
    dist = np.full((n, 2 * c.n_branches), -1, dtype=np.int64)
    _kernel.run_suites_coverage(
        c.code, inputs, c.n_slots, c.n_loops, c.stack_size,
        limits.max_loop_iterations, limits.max_total_steps,
        c.n_stmts, c.n_branches, stmt_cov, out_cov, dist,
    )
    return BatchCoverage(stmt_cov, out_cov, dist)


def write_trace_csv(report: CoverageReport | TraceResult, path: str | Path) -> Path:
    """Dump per-outcome minimum distances as ``branchId,outcome,minDistance``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dists = report.min_distances if isinstance(report, CoverageReport) else report.distances
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branchId", "outcome", "minDistance"])
        for (bid, outcome), d in sorted(dists.items(), key=lambda kv: (kv[0][0], not kv[0][1])):
            w.writerow([bid, "true" if outcome else "false", d])
    return path
