"""Time the compiled kernel against the pure-Python fallback.

    python benchmarks/bench_kernel.py [--suites 64] [--repeat 3]

Both backends run the same bytecode on the same inputs; outputs are compared
before timings are reported.
"""

import argparse
import time

import numpy as np

from sbstlab import _pykernel
from sbstlab.exec_cov import compile_program
from sbstlab.ge_gen import DEFAULT_GRAMMAR, GeConfig, Target, _flatten, run_ge

try:
    from sbstlab import _ckernel
except ImportError:
    _ckernel = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def bench_interpreter(impl, program, suites):
    c = compile_program(program)
    n = suites.shape[0]

    def go():
        stmt = np.zeros((n, c.n_stmts), dtype=np.uint8)
        out = np.zeros((n, 2 * c.n_branches), dtype=np.uint8)
        dist = np.full((n, 2 * c.n_branches), -1, dtype=np.int64)
        impl.run_suites_coverage(c.code, suites, c.n_slots, c.n_loops, c.stack_size, 1000,
                                 1_000_000, c.n_stmts, c.n_branches, stmt, out, dist)
        return stmt, out, dist

    return go


def bench_mapper(impl, genotypes):
    flat = _flatten(DEFAULT_GRAMMAR)

    def go():
        res = []
        for g in genotypes:
            counters = np.zeros(3, dtype=np.int64)
            used = impl.count_map(g, 3, flat.start, flat.sym_kind, flat.sym_value,
                                  flat.prod_offsets, flat.prod_counts, flat.prod_sym_offsets,
                                  flat.prod_sym_counts, flat.prod_syms, counters)
            res.append((used, tuple(counters)))
        return res

    return go


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--suites", type=int, default=64, help="suites per batch")
    ap.add_argument("--genotypes", type=int, default=500, help="genotypes to map")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernel is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    rows = []
    for target in ("branches=25", "statements=300"):
        program = run_ge(GeConfig(Target.parse(target), population_size=50, generations=200,
                                  seed=args.seed)).program
        suites = rng.integers(-1_000_000, 1_000_000, size=(args.suites, 10, 5), dtype=np.int64)
        tp, rp = best_of(bench_interpreter(_pykernel, program, suites), args.repeat)
        tc, rc = best_of(bench_interpreter(_ckernel, program, suites), args.repeat)
        assert all(np.array_equal(a, b) for a, b in zip(rp, rc)), "backends disagree"
        rows.append((f"interpreter {target} x{args.suites} suites", tp, tc))

    genotypes = [rng.integers(0, 256, size=int(rng.integers(50, 800)), dtype=np.int64)
                 for _ in range(args.genotypes)]
    tp, rp = best_of(bench_mapper(_pykernel, genotypes), args.repeat)
    tc, rc = best_of(bench_mapper(_ckernel, genotypes), args.repeat)
    assert rp == rc, "backends disagree"
    rows.append((f"GE count mapper x{args.genotypes} genotypes", tp, tc))

    print(f"{'workload':44s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, tp, tc in rows:
        print(f"{name:44s} {tp:10.4f} {tc:10.5f} {tp / tc:7.0f}x")


if __name__ == "__main__":
    main()
