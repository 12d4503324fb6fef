# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring ``_pykernel`` one-for-one."""

from libc.stdlib cimport malloc, free, realloc
from libc.stdint cimport int64_t, uint8_t

cdef extern from *:
    """
    static inline int sbst_add(long long a, long long b, long long *r) {
        return __builtin_add_overflow(a, b, r);
    }
    static inline int sbst_sub(long long a, long long b, long long *r) {
        return __builtin_sub_overflow(a, b, r);
    }
    static inline int sbst_mul(long long a, long long b, long long *r) {
        return __builtin_mul_overflow(a, b, r);
    }
    """
    int sbst_add(long long a, long long b, long long *r) nogil
    int sbst_sub(long long a, long long b, long long *r) nogil
    int sbst_mul(long long a, long long b, long long *r) nogil

cdef enum:
    OP_CONST = 0
    OP_LOAD = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_STORE = 5
    OP_COND = 6
    OP_JF = 7
    OP_JMP = 8
    OP_LOOP_RESET = 9
    OP_LOOP_GUARD = 10
    OP_LOOP_COUNT = 11
    OP_HALT = 12
    OP_STMT = 13
    REL_LT = 0
    REL_LE = 1
    REL_GT = 2
    REL_GE = 3
    REL_EQ = 4
    REL_NE = 5
    TERM_NORMAL = 0
    TERM_OVERFLOW = 1
    TERM_STEPS = 2

cdef long long DIST_MAX = 9223372036854775807LL


cdef inline int _negated(int rel) nogil:
    if rel == REL_LT:
        return REL_GE
    if rel == REL_LE:
        return REL_GT
    if rel == REL_GT:
        return REL_LE
    if rel == REL_GE:
        return REL_LT
    if rel == REL_EQ:
        return REL_NE
    return REL_EQ


cdef inline bint _holds(int rel, long long a, long long b) nogil:
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


cdef inline long long _gap(long long hi, long long lo) nogil:
    # hi - lo for hi > lo, saturating
    cdef long long r
    if sbst_sub(hi, lo, &r):
        return DIST_MAX
    return r


cdef inline long long _distance(int rel, long long a, long long b) nogil:
    cdef long long d
    if rel == REL_GE:
        return _gap(b, a) if a < b else 0
    if rel == REL_GT:
        if a > b:
            return 0
        d = _gap(b, a)
        return d + 1 if d < DIST_MAX else DIST_MAX
    if rel == REL_LE:
        return _gap(a, b) if a > b else 0
    if rel == REL_LT:
        if a < b:
            return 0
        d = _gap(a, b)
        return d + 1 if d < DIST_MAX else DIST_MAX
    if rel == REL_EQ:
        if a == b:
            return 0
        return _gap(a, b) if a > b else _gap(b, a)
    return 0 if a != b else 1


def distance(int rel, long long a, long long b):
    return _distance(rel, a, b)


cdef int _run(const int64_t[::1] code, const int64_t *inputs, int k,
              long long *slots, int nslots, long long *counters, int nloops,
              long long *stack, long long max_iters, long long max_steps,
              uint8_t *stmt_hit, uint8_t *out_hit, int64_t *dist) nogil:
    cdef Py_ssize_t pc = 0
    cdef int sp = 0
    cdef int i, op, rel, taken, other
    cdef long long a, b, r, d, steps = 0
    cdef bint flag = False
    for i in range(nslots):
        slots[i] = inputs[i] if i < k else 0
    for i in range(nloops):
        counters[i] = 0
    while True:
        op = <int>code[pc]
        if op == OP_LOAD:
            stack[sp] = slots[code[pc + 1]]
            sp += 1
            pc += 2
        elif op == OP_CONST:
            stack[sp] = code[pc + 1]
            sp += 1
            pc += 2
        elif op <= OP_MUL:
            sp -= 1
            b = stack[sp]
            a = stack[sp - 1]
            if op == OP_ADD:
                if sbst_add(a, b, &r):
                    return TERM_OVERFLOW
            elif op == OP_SUB:
                if sbst_sub(a, b, &r):
                    return TERM_OVERFLOW
            else:
                if sbst_mul(a, b, &r):
                    return TERM_OVERFLOW
            stack[sp - 1] = r
            pc += 1
        elif op == OP_STMT:
            if steps >= max_steps:
                return TERM_STEPS
            steps += 1
            stmt_hit[code[pc + 1]] = 1
            pc += 2
        elif op == OP_STORE:
            sp -= 1
            slots[code[pc + 1]] = stack[sp]
            pc += 2
        elif op == OP_COND:
            if steps >= max_steps:
                return TERM_STEPS
            steps += 1
            rel = <int>code[pc + 1]
            taken = <int>(2 * code[pc + 2])
            sp -= 2
            a = stack[sp]
            b = stack[sp + 1]
            flag = _holds(rel, a, b)
            if flag:
                other = taken + 1
                d = _distance(_negated(rel), a, b)
            else:
                other = taken
                taken = taken + 1
                d = _distance(rel, a, b)
            out_hit[taken] = 1
            dist[taken] = 0
            if dist[other] < 0 or d < dist[other]:
                dist[other] = d
            pc += 3
        elif op == OP_JF:
            if flag:
                pc += 2
            else:
                pc = code[pc + 1]
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
        else:
            return TERM_NORMAL


cdef class _Scratch:
    cdef long long *slots
    cdef long long *counters
    cdef long long *stack

    def __cinit__(self, int nslots, int nloops, int stack_size):
        self.slots = <long long *>malloc(sizeof(long long) * (nslots + 1))
        self.counters = <long long *>malloc(sizeof(long long) * (nloops + 1))
        self.stack = <long long *>malloc(sizeof(long long) * (stack_size + 1))
        if not self.slots or not self.counters or not self.stack:
            raise MemoryError()

    def __dealloc__(self):
        free(self.slots)
        free(self.counters)
        free(self.stack)


def run_case(const int64_t[::1] code, const int64_t[::1] inputs, int nslots,
             int nloops, int stack_size, long long max_iters,
             long long max_steps, uint8_t[::1] stmt_hit, uint8_t[::1] out_hit,
             int64_t[::1] dist):
    cdef _Scratch s = _Scratch(nslots, nloops, stack_size)
    cdef int term
    cdef uint8_t dummy = 0
    cdef int64_t ddummy = 0
    cdef uint8_t *sh = &stmt_hit[0] if stmt_hit.shape[0] else &dummy
    cdef uint8_t *oh = &out_hit[0] if out_hit.shape[0] else &dummy
    cdef int64_t *dd = &dist[0] if dist.shape[0] else &ddummy
    cdef const int64_t *inp = &inputs[0] if inputs.shape[0] else &ddummy
    with nogil:
        term = _run(code, inp, <int>inputs.shape[0], s.slots, nslots,
                    s.counters, nloops, s.stack, max_iters, max_steps,
                    sh, oh, dd)
    return term


def run_suite(const int64_t[::1] code, const int64_t[:, ::1] inputs, int nslots,
              int nloops, int stack_size, long long max_iters,
              long long max_steps, uint8_t[::1] stmt_hit, uint8_t[::1] out_hit,
              int64_t[::1] dist, int64_t[::1] terms):
    cdef _Scratch s = _Scratch(nslots, nloops, stack_size)
    cdef Py_ssize_t r
    cdef uint8_t dummy = 0
    cdef int64_t ddummy = 0
    cdef uint8_t *sh = &stmt_hit[0] if stmt_hit.shape[0] else &dummy
    cdef uint8_t *oh = &out_hit[0] if out_hit.shape[0] else &dummy
    cdef int64_t *dd = &dist[0] if dist.shape[0] else &ddummy
    cdef int k = <int>inputs.shape[1]
    with nogil:
        for r in range(inputs.shape[0]):
            terms[r] = _run(code, &inputs[r, 0] if k else &ddummy, k, s.slots,
                            nslots, s.counters, nloops, s.stack, max_iters,
                            max_steps, sh, oh, dd)


def run_suites_coverage(const int64_t[::1] code, const int64_t[:, :, ::1] inputs,
                        int nslots, int nloops, int stack_size,
                        long long max_iters, long long max_steps,
                        int n_stmts, int n_branches, uint8_t[:, ::1] stmt_cov,
                        uint8_t[:, ::1] out_cov, int64_t[:, ::1] dist):
    cdef _Scratch s = _Scratch(nslots, nloops, stack_size)
    cdef Py_ssize_t q, r, j
    cdef uint8_t dummy = 0
    cdef int64_t ddummy = 0
    cdef int k = <int>inputs.shape[2]
    cdef uint8_t *sh
    cdef uint8_t *oh
    cdef int64_t *dd
    with nogil:
        for q in range(inputs.shape[0]):
            for j in range(n_stmts):
                stmt_cov[q, j] = 0
            for j in range(2 * n_branches):
                out_cov[q, j] = 0
                dist[q, j] = -1
            sh = &stmt_cov[q, 0] if n_stmts else &dummy
            oh = &out_cov[q, 0] if n_branches else &dummy
            dd = &dist[q, 0] if n_branches else &ddummy
            for r in range(inputs.shape[1]):
                _run(code, &inputs[q, r, 0] if k else &ddummy, k, s.slots,
                     nslots, s.counters, nloops, s.stack, max_iters,
                     max_steps, sh, oh, dd)


def count_map(const int64_t[:] codons, int max_wraps, int start,
              const int64_t[:] sym_kind, const int64_t[:] sym_value,
              const int64_t[:] prod_offsets, const int64_t[:] prod_counts,
              const int64_t[:] prod_sym_offsets,
              const int64_t[:] prod_sym_counts, const int64_t[:] prod_syms,
              int64_t[:] counters):
    cdef Py_ssize_t n = codons.shape[0]
    cdef Py_ssize_t cap = 64, top = 0, pos = 0
    cdef long long used = 0
    cdef int wraps = 0
    cdef long long sym, kind, v, nt, p, off, j, c
    cdef long long *stack = <long long *>malloc(sizeof(long long) * cap)
    cdef long long *grown
    if not stack:
        raise MemoryError()
    try:
        stack[0] = start
        top = 1
        while top > 0:
            top -= 1
            sym = stack[top]
            kind = sym_kind[sym]
            if kind == 0:
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
            if kind == 2:
                continue
            nt = sym_value[sym]
            p = prod_offsets[nt] + c % prod_counts[nt]
            off = prod_sym_offsets[p]
            if top + prod_sym_counts[p] > cap:
                cap = 2 * (top + prod_sym_counts[p])
                grown = <long long *>realloc(stack, sizeof(long long) * cap)
                if not grown:
                    raise MemoryError()
                stack = grown
            j = off + prod_sym_counts[p] - 1
            while j >= off:
                stack[top] = prod_syms[j]
                top += 1
                j -= 1
        return used
    finally:
        free(stack)

