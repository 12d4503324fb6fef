"""Mini imperative language used for every generated program under test.

Programs are immutable trees of assignments, ``if`` statements and
non-nested ``loop`` statements over 64-bit signed integers. The canonical
text form looks like::

    program p(x0, x1)
    v0 = (x0 + 1);
    if (x0 >= (x1 + 10)) {
      v1 = v0;
    } else {
      v1 = 3;
    }
    loop (v2 < x1) {
      v2 = (v2 + 1);
    }

Locals (``v0``, ``v1`` ...) are zero-initialised at run time; a local is
considered declared from its first assignment in textual order onward.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

OPS = ("+", "-", "*")
RELS = ("<", "<=", ">", ">=", "==", "!=")


class SutSyntaxError(ValueError):
    """Raised by :func:`parse` on malformed program text."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SutValidationError(ValueError):
    """Raised by :func:`parse` when the text is well formed but invalid."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, BinOp]


@dataclass(frozen=True)
class Cond:
    left: Expr
    rel: str
    right: Expr
    branch_id: int


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    stmt_id: int


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] | None = None


@dataclass(frozen=True)
class Loop:
    cond: Cond
    body: tuple["Stmt", ...]


Stmt = Union[Assign, If, Loop]


@dataclass(frozen=True)
class Metrics:
    statements: int
    branches: int
    loops: int


@dataclass(frozen=True)
class Program:
    input_arity: int
    body: tuple[Stmt, ...]
    name: str = "p"
    metrics: Metrics = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "metrics", compute_metrics(self))

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(f"x{i}" for i in range(self.input_arity))


# ---------------------------------------------------------------------------
# traversal helpers


def walk(stmts: Iterable[Stmt]) -> Iterator[Stmt]:
    """Pre-order traversal over statements (then-block before else-block)."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk(s.then)
            if s.orelse is not None:
                yield from walk(s.orelse)
        elif isinstance(s, Loop):
            yield from walk(s.body)


def expr_vars(e: Expr) -> Iterator[str]:
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, BinOp):
        yield from expr_vars(e.left)
        yield from expr_vars(e.right)


def conds(program: Program) -> list[Cond]:
    return [s.cond for s in walk(program.body) if isinstance(s, (If, Loop))]


def assigns(program: Program) -> list[Assign]:
    return [s for s in walk(program.body) if isinstance(s, Assign)]


def block_statement_count(stmts: Iterable[Stmt] | None) -> int:
    if not stmts:
        return 0
    return sum(1 for s in walk(stmts) if isinstance(s, Assign))


def compute_metrics(program: Program) -> Metrics:
    s = b = lp = 0
    for node in walk(program.body):
        if isinstance(node, Assign):
            s += 1
        elif isinstance(node, If):
            b += 1
        else:
            b += 1
            lp += 1
    return Metrics(statements=s, branches=b, loops=lp)


def locals_of(program: Program) -> list[str]:
    """Locals in order of first assignment."""
    seen: dict[str, None] = {}
    for a in assigns(program):
        seen.setdefault(a.target, None)
    return list(seen)


# ---------------------------------------------------------------------------
# validation

_INPUT_RE = re.compile(r"x(0|[1-9][0-9]*)\Z")
_LOCAL_RE = re.compile(r"v(0|[1-9][0-9]*)\Z")


def _check_expr(e: Expr, declared: set[str], where: str, out: list[str]) -> None:
    if isinstance(e, Const):
        if not INT64_MIN <= e.value <= INT64_MAX:
            out.append(f"constant {e.value} out of 64-bit range at {where}")
    elif isinstance(e, Var):
        if e.name not in declared:
            out.append(f"undeclared variable {e.name} at {where}")
    elif isinstance(e, BinOp):
        if e.op not in OPS:
            out.append(f"unknown operator {e.op!r} at {where}")
        _check_expr(e.left, declared, where, out)
        _check_expr(e.right, declared, where, out)
    else:
        out.append(f"malformed expression {e!r} at {where}")


def validate(program: Program) -> list[str]:
    """Return every rule violation in ``program``; empty means valid."""
    out: list[str] = []
    if program.input_arity < 0:
        out.append("negative input arity")
    declared = set(program.inputs)
    stmt_ids: set[int] = set()
    branch_ids: set[int] = set()

    def visit(stmts, in_loop: bool) -> None:
        for s in stmts:
            if isinstance(s, Assign):
                where = f"stmtId={s.stmt_id}"
                if s.stmt_id in stmt_ids:
                    out.append(f"duplicate stmtId={s.stmt_id}")
                stmt_ids.add(s.stmt_id)
                _check_expr(s.value, declared, where, out)
                if _LOCAL_RE.match(s.target):
                    declared.add(s.target)
                else:
                    out.append(f"invalid assignment target {s.target!r} at {where}")
            elif isinstance(s, (If, Loop)):
                c = s.cond
                where = f"branchId={c.branch_id}"
                if c.branch_id in branch_ids:
                    out.append(f"duplicate branchId={c.branch_id}")
                branch_ids.add(c.branch_id)
                if c.rel not in RELS:
                    out.append(f"unknown relation {c.rel!r} at {where}")
                _check_expr(c.left, declared, where, out)
                _check_expr(c.right, declared, where, out)
                if isinstance(s, If):
                    visit(s.then, in_loop)
                    if s.orelse is not None:
                        visit(s.orelse, in_loop)
                else:
                    if in_loop:
                        out.append(f"nested loop at branchId={c.branch_id}")
                    visit(s.body, True)
            else:
                out.append(f"malformed statement {s!r}")

    visit(program.body, False)
    return out


def is_valid(program: Program) -> bool:
    return not validate(program)


# ---------------------------------------------------------------------------
# rendering

_INDENT = "  "


def render_expr(e: Expr) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    return f"({render_expr(e.left)} {e.op} {render_expr(e.right)})"


def render_cond(c: Cond) -> str:
    return f"{render_expr(c.left)} {c.rel} {render_expr(c.right)}"


def _render_block(stmts, depth: int, lines: list[str]) -> None:
    pad = _INDENT * depth
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{s.target} = {render_expr(s.value)};")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({render_cond(s.cond)}) {{")
            _render_block(s.then, depth + 1, lines)
            if s.orelse is not None:
                lines.append(f"{pad}}} else {{")
                _render_block(s.orelse, depth + 1, lines)
            lines.append(f"{pad}}}")
        else:
            lines.append(f"{pad}loop ({render_cond(s.cond)}) {{")
            _render_block(s.body, depth + 1, lines)
            lines.append(f"{pad}}}")


def render(program: Program) -> str:
    params = ", ".join(program.inputs)
    lines = [f"program {program.name}({params})"]
    _render_block(program.body, 0, lines)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[<>+\-*=;(){},])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"program", "if", "else", "loop"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SutSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            t = m.group()
            if kind == "ident" and t in _KEYWORDS:
                kind = t
            toks.append(_Tok(kind, t, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.next_stmt = 0
        self.next_branch = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, msg: str):
        t = self.tok
        found = t.text or "end of input"
        raise SutSyntaxError(f"{msg}, found {found!r}", t.line, t.col)

    def take(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text or t.kind == "eof":
            self.fail(f"expected {text!r}")
        self.i += 1
        return t

    def program(self) -> Program:
        self.take("program")
        if self.tok.kind != "ident":
            self.fail("expected program name")
        name = self.tok.text
        self.i += 1
        self.take("(")
        arity = 0
        if self.tok.text != ")":
            while True:
                t = self.tok
                if t.text != f"x{arity}":
                    self.fail(f"expected parameter x{arity}")
                self.i += 1
                arity += 1
                if self.tok.text == ",":
                    self.i += 1
                    continue
                break
        self.take(")")
        body = self.block(top=True)
        if self.tok.kind != "eof":
            self.fail("expected statement")
        return Program(input_arity=arity, body=tuple(body), name=name)

    def block(self, top: bool = False) -> list[Stmt]:
        out = []
        while True:
            t = self.tok
            if t.kind == "eof" or (not top and t.text == "}"):
                return out
            out.append(self.statement())

    def braced(self) -> tuple[Stmt, ...]:
        self.take("{")
        body = self.block()
        self.take("}")
        return tuple(body)

    def statement(self) -> Stmt:
        t = self.tok
        if t.kind in ("if", "loop"):
            self.i += 1
            self.take("(")
            bid = self.next_branch
            self.next_branch += 1
            left = self.expr()
            rt = self.tok
            if rt.text not in RELS:
                self.fail("expected relational operator")
            self.i += 1
            right = self.expr()
            self.take(")")
            cond = Cond(left, rt.text, right, bid)
            then = self.braced()
            if t.kind == "loop":
                return Loop(cond, then)
            orelse = None
            if self.tok.kind == "else":
                self.i += 1
                orelse = self.braced()
            return If(cond, then, orelse)
        if t.kind == "ident":
            self.i += 1
            sid = self.next_stmt
            self.next_stmt += 1
            self.take("=")
            value = self.expr()
            self.take(";")
            return Assign(t.text, value, sid)
        self.fail("expected statement")

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.atom()
        while self.tok.text == "*":
            self.i += 1
            left = BinOp("*", left, self.atom())
        return left

    def atom(self) -> Expr:
        t = self.tok
        if t.text == "(":
            self.i += 1
            e = self.expr()
            self.take(")")
            return e
        if t.text == "-" and self.toks[self.i + 1].kind == "num":
            self.i += 2
            return self._const(-int(self.toks[self.i - 1].text), t)
        if t.kind == "num":
            self.i += 1
            return self._const(int(t.text), t)
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        self.fail("expected expression")

    def _const(self, v: int, t: _Tok) -> Const:
        if not INT64_MIN <= v <= INT64_MAX:
            raise SutSyntaxError(f"integer literal {v} out of 64-bit range", t.line, t.col)
        return Const(v)


def parse(text: str, *, check: bool = True) -> Program:
    """Parse canonical program text, reassigning ids in pre-order.

    Raises :class:`SutSyntaxError` on malformed text and, when ``check`` is
    set, :class:`SutValidationError` listing rule violations.
    """
    program = _Parser(text).program()
    if check:
        problems = validate(program)
        if problems:
            raise SutValidationError(problems)
    return program


def renumber(program: Program) -> Program:
    """Copy of ``program`` with statement and branch ids reassigned pre-order."""
    counters = [0, 0]

    def block(stmts):
        out = []
        for s in stmts:
            if isinstance(s, Assign):
                out.append(Assign(s.target, s.value, counters[0]))
                counters[0] += 1
            else:
                c = Cond(s.cond.left, s.cond.rel, s.cond.right, counters[1])
                counters[1] += 1
                if isinstance(s, If):
                    then = block(s.then)
                    orelse = None if s.orelse is None else block(s.orelse)
                    out.append(If(c, then, orelse))
                else:
                    out.append(Loop(c, block(s.body)))
        return tuple(out)

    return Program(program.input_arity, block(program.body), program.name)
