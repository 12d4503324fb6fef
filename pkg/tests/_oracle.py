"""Reference implementations used only by the tests.

``walk_run`` interprets the AST directly with Python integers; it shares no
code with the bytecode kernels. ``korel`` brute-forces branch distances as
the smallest shift of the left operand that makes the relation hold.
"""

import operator
import random

from sbstlab.sut_lang import Assign, BinOp, Cond, Const, If, Loop, Program, Var, renumber

LO, HI = -(2**63), 2**63 - 1

_REL = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
        "==": operator.eq, "!=": operator.ne}
_OP = {"+": operator.add, "-": operator.sub, "*": operator.mul}
_NEG = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def korel(rel: str, a: int, b: int, desired: bool = True) -> int:
    """Smallest k >= 0 with rel(a +- k, b) == desired, by search."""
    if not desired:
        rel = _NEG[rel]
    f = _REL[rel]
    k = 0
    while not (f(a + k, b) or f(a - k, b)):
        k += 1
    return k


class _Halt(Exception):
    def __init__(self, kind):
        self.kind = kind


def walk_run(program: Program, inputs, max_iters=1000, max_steps=1_000_000):
    """(executed stmt ids, covered outcomes, min distances, termination)."""
    env = {f"x{i}": int(v) for i, v in enumerate(inputs)}
    executed, covered, dist = set(), set(), {}
    steps = [0]

    def tick():
        if steps[0] >= max_steps:
            raise _Halt("stepLimit")
        steps[0] += 1

    def ev(e):
        if isinstance(e, Const):
            return e.value
        if isinstance(e, Var):
            return env.get(e.name, 0)
        r = _OP[e.op](ev(e.left), ev(e.right))
        if not LO <= r <= HI:
            raise _Halt("overflowHalt")
        return r

    def test(c: Cond) -> bool:
        a, b = ev(c.left), ev(c.right)
        tick()
        taken = _REL[c.rel](a, b)
        covered.add((c.branch_id, taken))
        for want in (True, False):
            d = 0 if taken == want else min(korel_fast(c.rel, a, b, want), HI)
            key = (c.branch_id, want)
            dist[key] = min(dist.get(key, HI), d)
        return taken

    def block(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                tick()
                executed.add(s.stmt_id)
                env[s.target] = ev(s.value)
            elif isinstance(s, If):
                if test(s.cond):
                    block(s.then)
                elif s.orelse is not None:
                    block(s.orelse)
            elif isinstance(s, Loop):
                n = 0
                while n < max_iters and test(s.cond):
                    n += 1
                    block(s.body)

    try:
        block(program.body)
        term = "normal"
    except _Halt as h:
        term = h.kind
    return executed, covered, dist, term


def korel_fast(rel: str, a: int, b: int, desired: bool) -> int:
    """Closed form of :func:`korel` for operands too far apart to search."""
    if not desired:
        rel = _NEG[rel]
    if _REL[rel](a, b):
        return 0
    if rel in ("<", ">"):
        return abs(a - b) + 1
    if rel == "!=":
        return 1
    return abs(a - b)


def random_program(seed: int, arity: int = 2, max_branches: int = 3) -> Program:
    """Small random valid program with at most ``max_branches`` conditions.

    Includes else arms, counted and unbounded loops (to hit the guard) and
    multiplications that can overflow inside loops.
    """
    rng = random.Random(seed)
    inputs = [f"x{i}" for i in range(arity)]
    declared: list[str] = []
    budget = [max_branches]

    def atom():
        pool = inputs + declared
        if rng.random() < 0.3:
            return Const(rng.randint(-12, 12))
        return Var(rng.choice(pool))

    def expr(depth=2):
        if depth == 0 or rng.random() < 0.4:
            return atom()
        return BinOp(rng.choice("+-*"), expr(depth - 1), expr(depth - 1))

    def cond():
        return Cond(expr(1), rng.choice(list(_REL)), expr(1), 0)

    def assign():
        if declared and rng.random() < 0.6:
            t = rng.choice(declared)
        else:
            t = f"v{len(declared)}"
        a = Assign(t, expr(), 0)
        if t not in declared:
            declared.append(t)
        return a

    def stmts(n, in_loop):
        out = []
        for _ in range(n):
            r = rng.random()
            if budget[0] > 0 and r < 0.25:
                budget[0] -= 1
                c = cond()
                then = tuple(stmts(rng.randint(1, 2), in_loop))
                orelse = tuple(stmts(rng.randint(1, 2), in_loop)) if rng.random() < 0.5 else None
                out.append(If(c, then, orelse))
            elif budget[0] > 0 and r < 0.4 and not in_loop:
                budget[0] -= 1
                if rng.random() < 0.5:
                    v = f"v{len(declared)}"
                    declared.append(v)
                    out.append(Assign(v, Const(0), 0))
                    body = tuple(stmts(rng.randint(1, 2), True)) + (
                        Assign(v, BinOp("+", Var(v), Const(1)), 0),)
                    out.append(Loop(Cond(Var(v), "<", Const(rng.randint(0, 6)), 0), body))
                else:
                    c = cond()
                    body = tuple(stmts(rng.randint(1, 2), True))
                    if rng.random() < 0.3 and declared:
                        t = rng.choice(declared)
                        body += (Assign(t, BinOp("*", Var(t), Const(rng.choice((3, -7)))), 0),)
                    out.append(Loop(c, body))
            else:
                out.append(assign())
        return out

    body = stmts(rng.randint(1, 5), False)
    return renumber(Program(arity, tuple(body)))
