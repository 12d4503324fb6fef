"""Grammatical evolution of programs with a target statement or branch count.

A genotype is a list of codons in ``[0, 255]``. Mapping performs a leftmost
derivation through the built-in grammar: each nonterminal expansion reads the
next codon and picks production ``codon % len(productions)``; codons are
reused from the start up to ``max_wraps`` times.

Variable references are context dependent (only inputs and already assigned
locals are readable), so ``<var>`` and ``<target>`` are *dynamic*
nonterminals whose choice list is computed during mapping. They still
consume exactly one codon, which lets the compiled kernel compute structural
metrics without building the tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from . import _kernel
from . import _pykernel as K
from .search import roulette_sample
from .sut_lang import (
    RELS,
    Assign,
    BinOp,
    Cond,
    Const,
    If,
    Loop,
    Metrics,
    Program,
    Var,
    renumber,
    validate,
)

CODON_MAX = 255
WORST_SCORE = math.inf

CONSTANTS = (0, 1, 2, 3, 5, 10, -1, -10, 100, -100, 1000, -1000,
             50000, -50000, 250000, -250000)
# multiplication is only by one of these, which keeps most values in range
SCALES = (2, 3, 5, 10, -1, -2)

# terminals that feed the structural counters: index into the counter array
COUNTED = {"ASSIGN": 0, "IF": 1, "IFELSE": 1, "LOOP": 2}

_REL_TOKENS = {"LT": "<", "LE": "<=", "GT": ">", "GE": ">=", "EQ": "==", "NE": "!="}
_OP_TOKENS = {"ADD": "+", "SUB": "-", "MUL": "*"}


class MappingFailure(Exception):
    """Nonterminals remained after the allowed number of wraps."""

    reason = "wrapsExhausted"


class GenerationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class GrammarSpec:
    rules: dict[str, tuple[tuple[str, ...], ...]]
    start: str
    dynamic: frozenset[str] = frozenset({"<var>", "<ivar>", "<target>"})
    loop_bodies: frozenset[str] = frozenset()

    def is_nonterminal(self, sym: str) -> bool:
        return sym in self.rules or sym in self.dynamic

    def problems(self) -> list[str]:
        out = []
        if self.start not in self.rules:
            out.append(f"start symbol {self.start} undefined")
        for lhs, prods in self.rules.items():
            if not prods:
                out.append(f"{lhs} has no productions")
            for prod in prods:
                for sym in prod:
                    if sym.startswith("<") and not self.is_nonterminal(sym):
                        out.append(f"{sym} referenced in {lhs} but undefined")
                    if sym in ("/", "DIV"):
                        out.append(f"division in production of {lhs}")
        for body in self.loop_bodies:
            if "LOOP" in self.reachable_terminals(body):
                out.append(f"loop body {body} can derive a nested loop")
        return out

    def reachable_terminals(self, sym: str) -> set[str]:
        seen, terms, todo = set(), set(), [sym]
        while todo:
            s = todo.pop()
            if s in seen:
                continue
            seen.add(s)
            for prod in self.rules.get(s, ()):
                for t in prod:
                    if t in self.rules:
                        todo.append(t)
                    elif t not in self.dynamic:
                        terms.add(t)
        return terms


def build_grammar(if_depth: int = 3, expr_depth: int = 4) -> GrammarSpec:
    """The shipped grammar.

    Loops only at top level with a fresh counter variable; ``if`` nesting is
    bounded by ``if_depth`` and expression height by ``expr_depth``. Products
    always have a small constant right operand.
    """
    r: dict[str, tuple[tuple[str, ...], ...]] = {}
    r["<prog>"] = (("<tblock>",),)
    r["<tblock>"] = (
        ("<tstmt>",),
        ("<tstmt>", "<tblock>"),
        ("<tstmt>", "<tstmt>", "<tblock>"),
        ("<tstmt>", "<tstmt>", "<tstmt>", "<tblock>"),
    )
    top = if_depth
    r["<tstmt>"] = (
        ("<assign>",),
        ("<assign>",),
        (f"<if{top}>",),
        (f"<ifelse{top}>",),
        ("<loop>",),
    )
    body = f"<block{max(top - 1, 0)}>"
    r["<loop>"] = (("LOOP", f"<expr{expr_depth - 2}>", "LOOPVAR", "BEGIN", body, "LOOPEND"),)
    for d in range(top + 1):
        r[f"<block{d}>"] = (
            (f"<stmt{d}>",),
            (f"<stmt{d}>", f"<block{d}>"),
            (f"<stmt{d}>", f"<stmt{d}>", f"<block{d}>"),
        )
        if d == 0:
            r["<stmt0>"] = (("<assign>",),)
        else:
            r[f"<stmt{d}>"] = (
                ("<assign>",),
                ("<assign>",),
                (f"<if{d}>",),
                (f"<ifelse{d}>",),
            )
            inner = f"<block{d - 1}>"
            r[f"<if{d}>"] = (("IF", "<cond>", "BEGIN", inner, "END"),)
            r[f"<ifelse{d}>"] = (
                ("IFELSE", "<cond>", "BEGIN", inner, "END", "BEGIN", inner, "END"),
            )
    r["<assign>"] = (("ASSIGN", f"<expr{expr_depth - 1}>", "<target>"),)
    r["<cond>"] = (("<ivar>", "<rel>", f"<expr{expr_depth - 2}>", "CONDEND"),)
    # equality relations are needles for random inputs; keep them rarer
    r["<rel>"] = tuple((t,) for t in ("LT", "LE", "GT", "GE") * 2 + ("EQ", "NE"))
    r["<expr0>"] = (("<atom>",),)
    for d in range(1, expr_depth):
        sub = f"<expr{d - 1}>"
        r[f"<expr{d}>"] = (
            ("<atom>",),
            ("<atom>",),
            ("ADD", sub, sub),
            ("SUB", sub, sub),
            ("MUL", sub, "<scale>"),
        )
    r["<atom>"] = (("<var>",), ("<var>",), ("<const>",))
    r["<const>"] = tuple((f"C{v}",) for v in CONSTANTS)
    r["<scale>"] = tuple((f"C{v}",) for v in SCALES)
    return GrammarSpec(
        rules=r,
        start="<prog>",
        loop_bodies=frozenset({body}),
    )


DEFAULT_GRAMMAR = build_grammar()


# ---------------------------------------------------------------------------
# mapping


class _Context:
    """Variable scope tracked during derivation."""

    def __init__(self, arity: int):
        self.readable = [f"x{i}" for i in range(arity)]
        self.locals: list[str] = []
        self.protected: list[str] = []
        # left operand of the condition being derived; not readable on its right
        self.cond_left: str | None = None

    def fresh(self) -> str:
        name = f"v{len(self.locals)}"
        self.locals.append(name)
        self.readable.append(name)
        return name

    def targets(self) -> list[str]:
        return [v for v in self.locals if v not in self.protected]


def derive(codons, grammar: GrammarSpec, max_wraps: int, arity: int) -> list:
    """Leftmost derivation; returns the terminal token stream.

    Dynamic choices appear as ``("VAR", name)`` / ``("TARGET", name)`` tuples.
    """
    codons = list(codons)
    if not codons:
        raise ValueError("genotype must be non-empty")
    n = len(codons)
    ctx = _Context(arity)
    stack = [grammar.start]
    out: list = []
    pos = wraps = 0
    rules = grammar.rules
    while stack:
        sym = stack.pop()
        if sym not in rules and sym not in grammar.dynamic:
            if sym == "LOOPVAR":
                v = ctx.fresh()
                ctx.protected.append(v)
                out.append(("LOOPVAR", v))
            elif sym == "LOOPEND":
                ctx.protected.pop()
                out.append(sym)
            elif sym == "CONDEND":
                ctx.cond_left = None
            else:
                out.append(sym)
            continue
        if pos == n:
            wraps += 1
            if wraps > max_wraps:
                raise MappingFailure("wraps exhausted")
            pos = 0
        c = codons[pos]
        pos += 1
        if sym == "<ivar>":
            if arity:
                ctx.cond_left = f"x{c % arity}"
                out.append(("VAR", ctx.cond_left))
            else:
                out.append(("CONST", 0))
        elif sym == "<var>":
            choices = [v for v in ctx.readable if v != ctx.cond_left]
            out.append(("VAR", choices[c % len(choices)]) if choices else ("CONST", 0))
        elif sym == "<target>":
            choices = ctx.targets()
            i = c % (len(choices) + 1)
            out.append(("TARGET", choices[i] if i < len(choices) else ctx.fresh()))
        else:
            prods = rules[sym]
            stack.extend(reversed(prods[c % len(prods)]))
    return out


class _Builder:
    def __init__(self, tokens: list):
        self.it: Iterator = iter(tokens)

    def next(self):
        return next(self.it)

    def block(self, end: str) -> tuple:
        stmts = []
        while True:
            t = self.next()
            if t == end:
                return tuple(stmts)
            stmts.extend(self.stmt(t))

    def stmt(self, t) -> list:
        if t == "ASSIGN":
            value = self.expr()
            _, target = self.next()
            return [Assign(target, value, 0)]
        if t in ("IF", "IFELSE"):
            cond = self.cond()
            self.expect("BEGIN")
            then = self.block("END")
            orelse = None
            if t == "IFELSE":
                self.expect("BEGIN")
                orelse = self.block("END")
            return [If(cond, then, orelse)]
        if t == "LOOP":
            bound = self.expr()
            _, v = self.next()
            self.expect("BEGIN")
            body = self.block("LOOPEND")
            incr = Assign(v, BinOp("+", Var(v), Const(1)), 0)
            return [Assign(v, Const(0), 0), Loop(Cond(Var(v), "<", bound, 0), body + (incr,))]
        raise ValueError(f"unexpected token {t!r}")

    def expect(self, tok: str) -> None:
        t = self.next()
        if t != tok:
            raise ValueError(f"expected {tok}, got {t!r}")

    def cond(self) -> Cond:
        left = self.expr()
        rel = _REL_TOKENS[self.next()]
        right = self.expr()
        return Cond(left, rel, right, 0)

    def expr(self):
        t = self.next()
        if isinstance(t, tuple):
            return Var(t[1]) if t[0] == "VAR" else Const(t[1])
        if t in _OP_TOKENS:
            left = self.expr()
            return BinOp(_OP_TOKENS[t], left, self.expr())
        if t.startswith("C"):
            return Const(int(t[1:]))
        raise ValueError(f"unexpected token {t!r}")


def map_genotype(codons, grammar: GrammarSpec = DEFAULT_GRAMMAR, max_wraps: int = 3,
                 arity: int = 5, name: str = "p") -> Program:
    """Map a genotype to a program; raises :class:`MappingFailure`."""
    tokens = derive(codons, grammar, max_wraps, arity)
    body = _Builder(tokens + ["EOF"]).block("EOF")
    return renumber(Program(arity, body, name))


@dataclass(frozen=True)
class _FlatGrammar:
    start: int
    sym_kind: np.ndarray
    sym_value: np.ndarray
    prod_offsets: np.ndarray
    prod_counts: np.ndarray
    prod_sym_offsets: np.ndarray
    prod_sym_counts: np.ndarray
    prod_syms: np.ndarray


def _flatten(grammar: GrammarSpec) -> _FlatGrammar:
    symbols: dict[str, int] = {}
    kinds, values = [], []
    nts = list(grammar.rules)

    def sym_id(s: str) -> int:
        if s not in symbols:
            symbols[s] = len(kinds)
            if s in grammar.rules:
                kinds.append(K.SYM_NONTERMINAL)
                values.append(nts.index(s))
            elif s in grammar.dynamic:
                kinds.append(K.SYM_DYNAMIC)
                values.append(-1)
            else:
                kinds.append(K.SYM_TERMINAL)
                values.append(COUNTED.get(s, -1))
        return symbols[s]

    start = sym_id(grammar.start)
    offs, counts, p_offs, p_counts, syms = [], [], [], [], []
    for nt in nts:
        offs.append(len(p_offs))
        counts.append(len(grammar.rules[nt]))
        for prod in grammar.rules[nt]:
            p_offs.append(len(syms))
            p_counts.append(len(prod))
            syms.extend(sym_id(s) for s in prod)
    a = K.to_array
    return _FlatGrammar(start, a(kinds), a(values), a(offs), a(counts), a(p_offs),
                        a(p_counts), a(syms))


# keyed by id; the grammar is stored too so its id cannot be reused
_FLAT_CACHE: dict[int, tuple[GrammarSpec, _FlatGrammar]] = {}


def structural_metrics(codons, grammar: GrammarSpec = DEFAULT_GRAMMAR,
                       max_wraps: int = 3) -> Metrics | None:
    """Metrics of the mapped program without building it; None on failure."""
    hit = _FLAT_CACHE.get(id(grammar))
    if hit is None or hit[0] is not grammar:
        hit = _FLAT_CACHE[id(grammar)] = (grammar, _flatten(grammar))
    flat = hit[1]
    counters = np.zeros(3, dtype=np.int64)
    used = _kernel.count_map(
        np.ascontiguousarray(codons, dtype=np.int64), max_wraps, flat.start,
        flat.sym_kind, flat.sym_value, flat.prod_offsets, flat.prod_counts,
        flat.prod_sym_offsets, flat.prod_sym_counts, flat.prod_syms, counters,
    )
    if used < 0:
        return None
    assigns, ifs, loops = (int(x) for x in counters)
    return Metrics(statements=assigns + 2 * loops, branches=ifs + loops, loops=loops)


# ---------------------------------------------------------------------------
# fitness and evolution


@dataclass(frozen=True)
class Target:
    kind: str  # "statements" | "branches"
    value: int

    def __post_init__(self):
        if self.kind not in ("statements", "branches"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.value < 0:
            raise ValueError("target value must be >= 0")

    def metric(self, m: Metrics) -> int:
        return m.statements if self.kind == "statements" else m.branches

    @property
    def tolerance(self) -> float:
        return 0.05 * self.value

    @classmethod
    def parse(cls, text: str) -> "Target":
        kind, _, value = text.partition("=")
        kind = kind.strip().lower()
        kind = {"statement": "statements", "branch": "branches"}.get(kind, kind)
        return cls(kind, int(value))


def ge_fitness(program: Program | Metrics | None, target: Target) -> float:
    """Absolute distance of the program's metric from the target; 0 is best."""
    if program is None:
        return WORST_SCORE
    m = program.metrics if isinstance(program, Program) else program
    return float(abs(target.metric(m) - target.value))


@dataclass(frozen=True)
class GeConfig:
    target: Target
    population_size: int = 200
    generations: int = 10000
    initial_chromosome_size: int = 200
    max_wraps: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.01
    elitism: int = 1
    max_chromosome_size: int = 4000
    input_arity: int = 5
    seed: int = 0
    stop_on_exact: bool = True

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_wraps < 1:
            raise ValueError("max_wraps must be >= 1")
        for r in (self.crossover_rate, self.mutation_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if self.initial_chromosome_size < 1 or self.generations < 0:
            raise ValueError("chromosome size must be >= 1 and generations >= 0")


@dataclass
class GeRun:
    program: Program
    target: Target
    achieved: int
    fitness: float
    seed: int
    generations_used: int
    within_tolerance: bool
    best_history: list[float] = field(default_factory=list)


def run_ge(config: GeConfig, grammar: GrammarSpec = DEFAULT_GRAMMAR) -> GeRun:
    """One seeded GE run; returns its best individual, mapped."""
    rng = np.random.default_rng(config.seed)
    target = config.target
    pop = [rng.integers(0, CODON_MAX + 1, size=config.initial_chromosome_size, dtype=np.int64)
           for _ in range(config.population_size)]

    def score(g):
        return ge_fitness(structural_metrics(g, grammar, config.max_wraps), target)

    scores = np.array([score(g) for g in pop])
    best_i = int(np.argmin(scores))
    history = [float(scores[best_i])]
    gen = 0
    while gen < config.generations and not (config.stop_on_exact and history[-1] == 0):
        gen += 1
        weights = np.where(np.isfinite(scores), 1.0 / (1.0 + scores), 0.0)
        order = np.argsort(scores, kind="stable")
        nxt = [pop[i] for i in order[: config.elitism]]
        nxt_scores = [scores[i] for i in order[: config.elitism]]
        while len(nxt) < config.population_size:
            a, b = (pop[i] for i in roulette_sample(weights, 2, rng))
            if rng.random() < config.crossover_rate and len(a) > 1 and len(b) > 1:
                ca = int(rng.integers(1, len(a)))
                cb = int(rng.integers(1, len(b)))
                kids = [np.concatenate((a[:ca], b[cb:])), np.concatenate((b[:cb], a[ca:]))]
            else:
                kids = [a.copy(), b.copy()]
            for kid in kids:
                if len(nxt) >= config.population_size:
                    break
                kid = kid[: config.max_chromosome_size]
                mask = rng.random(kid.size) < config.mutation_rate
                if mask.any():
                    kid[mask] = rng.integers(0, CODON_MAX + 1, size=int(mask.sum()))
                nxt.append(kid)
                nxt_scores.append(score(kid))
        pop = nxt
        scores = np.array(nxt_scores)
        best_i = int(np.argmin(scores))
        history.append(float(scores[best_i]))
    best = pop[best_i]
    best_score = float(scores[best_i])
    if not math.isfinite(best_score):
        raise GenerationFailure(f"GE run with seed {config.seed} produced no mappable genotype")
    program = map_genotype(best, grammar, config.max_wraps, config.input_arity)
    achieved = target.metric(program.metrics)
    return GeRun(
        program=program,
        target=target,
        achieved=achieved,
        fitness=ge_fitness(program, target),
        seed=config.seed,
        generations_used=gen,
        within_tolerance=abs(achieved - target.value) <= target.tolerance,
        best_history=history,
    )


def evolve_programs(config: GeConfig, count: int,
                    grammar: GrammarSpec = DEFAULT_GRAMMAR) -> list[GeRun]:
    """``count`` distinct programs, run ``i`` seeded with ``config.seed + i``.

    Runs whose best program duplicates an earlier one, or that fail to map,
    are skipped and further seeds tried, up to ``3 * count`` runs.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    runs: list[GeRun] = []
    seen: set[Program] = set()
    for i in range(3 * count):
        if len(runs) == count:
            break
        try:
            run = run_ge(replace(config, seed=config.seed + i), grammar)
        except GenerationFailure:
            continue
        assert not validate(run.program), validate(run.program)
        if run.program in seen:
            continue
        seen.add(run.program)
        runs.append(run)
    if not runs:
        raise GenerationFailure("no valid program produced within budget")
    return runs
