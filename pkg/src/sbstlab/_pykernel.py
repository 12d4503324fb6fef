"""Pure-Python kernels; the reference behaviour for ``_ckernel``.

Both modules expose the same functions with the same argument order so the
caller can swap them at import time.
"""

import numpy as np

# bytecode opcodes; operand counts in OPERANDS
OP_CONST = 0  # value
OP_LOAD = 1  # slot
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_STORE = 5  # slot
OP_COND = 6  # rel, branch_id
OP_JF = 7  # target
OP_JMP = 8  # target
OP_LOOP_RESET = 9  # loop index
OP_LOOP_GUARD = 10  # loop index, exit target
OP_LOOP_COUNT = 11  # loop index
OP_HALT = 12
OP_STMT = 13  # stmt_id; marks the statement reached

OPERANDS = (1, 1, 0, 0, 0, 1, 2, 1, 1, 1, 2, 1, 0, 1)

# relation codes, in sut_lang.RELS order
REL_LT, REL_LE, REL_GT, REL_GE, REL_EQ, REL_NE = range(6)
NEGATED = (REL_GE, REL_GT, REL_LE, REL_LT, REL_NE, REL_EQ)

TERM_NORMAL, TERM_OVERFLOW, TERM_STEPS = 0, 1, 2

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
DIST_MAX = INT64_MAX

# GE symbol kinds for the structural counting mapper
SYM_TERMINAL, SYM_NONTERMINAL, SYM_DYNAMIC = 0, 1, 2


def holds(rel, a, b):
    if rel == REL_LT:
        return a < b
    if rel == REL_LE:
        return a <= b
    if rel == REL_GT:
        return a > b
    if rel == REL_GE:
        return a >= b
    if rel == REL_EQ:
        return a == b
    return a != b


def distance(rel, a, b):
    """Distance to making ``a rel b`` true; zero iff it already holds."""
    if rel == REL_GE:
        d = b - a
    elif rel == REL_GT:
        d = b - a + 1
    elif rel == REL_LE:
        d = a - b
    elif rel == REL_LT:
        d = a - b + 1
    elif rel == REL_EQ:
        d = abs(a - b)
    else:
        d = 0 if a != b else 1
    if d <= 0:
        return 0
    return d if d < DIST_MAX else DIST_MAX


def run_case(code, inputs, nslots, nloops, stack_size, max_iters, max_steps,
             stmt_hit, out_hit, dist):
    """Execute one test case, merging coverage into the given arrays.

    ``stmt_hit`` and ``out_hit`` are OR-ed, ``dist`` (-1 = absent) is
    min-merged. Returns a termination code.
    """
    if not isinstance(code, list):
        code = code.tolist()
    slots = [0] * nslots
    for i, v in enumerate(inputs):
        slots[i] = int(v)
    counters = [0] * nloops
    stack = []
    flag = False
    steps = 0
    pc = 0
    while True:
        op = code[pc]
        if op == OP_LOAD:
            stack.append(slots[code[pc + 1]])
            pc += 2
        elif op == OP_CONST:
            stack.append(code[pc + 1])
            pc += 2
        elif op <= OP_MUL:
            b = stack.pop()
            a = stack.pop()
            if op == OP_ADD:
                r = a + b
            elif op == OP_SUB:
                r = a - b
            else:
                r = a * b
            if r < INT64_MIN or r > INT64_MAX:
                return TERM_OVERFLOW
            stack.append(r)
            pc += 1
        elif op == OP_STMT:
            if steps >= max_steps:
                return TERM_STEPS
            steps += 1
            stmt_hit[code[pc + 1]] = 1
            pc += 2
        elif op == OP_STORE:
            slots[code[pc + 1]] = stack.pop()
            pc += 2
        elif op == OP_COND:
            if steps >= max_steps:
                return TERM_STEPS
            steps += 1
            rel = code[pc + 1]
            base = 2 * code[pc + 2]
            b = stack.pop()
            a = stack.pop()
            flag = holds(rel, a, b)
            taken, other = (base, base + 1) if flag else (base + 1, base)
            out_hit[taken] = 1
            dist[taken] = 0
            d = distance(NEGATED[rel] if flag else rel, a, b)
            if dist[other] < 0 or d < dist[other]:
                dist[other] = d
            pc += 3
        elif op == OP_JF:
            pc = pc + 2 if flag else code[pc + 1]
        elif op == OP_JMP:
            pc = code[pc + 1]
        elif op == OP_LOOP_RESET:
            counters[code[pc + 1]] = 0
            pc += 2
        elif op == OP_LOOP_GUARD:
            if counters[code[pc + 1]] >= max_iters:
                pc = code[pc + 2]
            else:
                pc += 3
        elif op == OP_LOOP_COUNT:
            counters[code[pc + 1]] += 1
            pc += 2
        elif op == OP_HALT:
            return TERM_NORMAL
        else:
            raise ValueError(f"bad opcode {op} at {pc}")


def run_suite(code, inputs, nslots, nloops, stack_size, max_iters, max_steps,
              stmt_hit, out_hit, dist, terms):
    code = code.tolist()
    for r in range(inputs.shape[0]):
        terms[r] = run_case(code, inputs[r].tolist(), nslots, nloops, stack_size,
                            max_iters, max_steps, stmt_hit, out_hit, dist)


def run_suites_coverage(code, inputs, nslots, nloops, stack_size, max_iters,
                        max_steps, n_stmts, n_branches, stmt_cov, out_cov,
                        dist):
    """Evaluate many suites at once; ``inputs`` has shape (suites, m, k).

    Row ``s`` of ``stmt_cov`` / ``out_cov`` / ``dist`` receives suite ``s``'s
    merged coverage.
    """
    code = code.tolist()
    for s in range(inputs.shape[0]):
        sh = [0] * n_stmts
        oh = [0] * (2 * n_branches)
        dd = [-1] * (2 * n_branches)
        for r in range(inputs.shape[1]):
            run_case(code, inputs[s, r].tolist(), nslots, nloops, stack_size,
                     max_iters, max_steps, sh, oh, dd)
        stmt_cov[s, :] = sh
        out_cov[s, :] = oh
        dist[s, :] = dd


def count_map(codons, max_wraps, start, sym_kind, sym_value, prod_offsets,
              prod_counts, prod_sym_offsets, prod_sym_counts, prod_syms,
              counters):
    """Leftmost GE derivation that only tallies terminal markers.

    Terminal symbols with value >= 0 increment ``counters[value]``. Dynamic
    nonterminals consume one codon and expand to nothing. Returns the number
    of codons read, or -1 when wraps are exhausted.
    """
    codons = codons.tolist() if hasattr(codons, "tolist") else list(codons)
    n = len(codons)
    stack = [start]
    pos = 0
    wraps = 0
    used = 0
    while stack:
        sym = stack.pop()
        kind = sym_kind[sym]
        if kind == SYM_TERMINAL:
            v = sym_value[sym]
            if v >= 0:
                counters[v] += 1
            continue
        if pos == n:
            wraps += 1
            if wraps > max_wraps:
                return -1
            pos = 0
        c = codons[pos]
        pos += 1
        used += 1
        if kind == SYM_DYNAMIC:
            continue
        nt = sym_value[sym]
        p = prod_offsets[nt] + c % prod_counts[nt]
        off = prod_sym_offsets[p]
        for j in range(off + prod_sym_counts[p] - 1, off - 1, -1):
            stack.append(prod_syms[j])
    return used


def to_array(values):
    return np.asarray(values, dtype=np.int64)
