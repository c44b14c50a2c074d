"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each kernel runs on identical inputs under both backends; outputs are
checked for equality before timings are reported.
"""

import argparse
import sys
import time

import numpy as np

from qbb import engine, kernels
from qbb.engine import SolverConfig, solve
from qbb.instances import gen_random, gen_xorsat


def _best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def kernel_cases(quick):
    m = gen_random(60 if quick else 200, density=0.1, coef_range=10, seed=1)
    args = (m.linear,) + m.csr
    rng = np.random.default_rng(0)
    n = m.n
    reads, sweeps = (4, 20) if quick else (10, 100)
    x0 = rng.integers(0, 2, (reads, n)).astype(np.uint8)
    order = np.argsort(rng.random((reads, sweeps, n)), axis=2).astype(np.int32)
    u = rng.random((reads, sweeps, n))
    temps = np.geomspace(10.0, 0.01, sweeps)
    states = rng.choice([-1, 0, 1], size=n).astype(np.int8)
    return [
        ("flip_deltas", lambda k: k.flip_deltas(*args, x0[0])),
        ("descend", lambda k: k.descend(*args, x0[0])),
        (f"anneal {reads}x{sweeps}", lambda k: k.anneal(*args, x0, order, u, temps)),
        (f"tabu {reads}x{sweeps * 2}", lambda k: k.tabu(*args, x0, sweeps * 2, 10)),
        ("node_bound", lambda k: k.node_bound(*args, states, np.empty(n))[:3]),
    ]


def search_case(quick, repeat):
    m = gen_xorsat(10 if quick else 14, seed=3).model
    cfg = SolverConfig(branching="index")
    t_c, r_c = _best_of(lambda: solve(m, cfg), repeat)
    saved = engine.kernels.HAS_SEARCH
    engine.kernels.HAS_SEARCH = False
    try:
        t_p, r_p = _best_of(lambda: solve(m, cfg), 1)
    finally:
        engine.kernels.HAS_SEARCH = saved
    same = (r_c.nodes_explored, r_c.best_value) == (r_p.nodes_explored, r_p.best_value)
    return f"search ({r_c.nodes_explored} nodes)", t_p, t_c, same


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--quick", action="store_true", help="small inputs (smoke test)")
    args = p.parse_args(argv)

    found = kernels.backends()
    if "cython" not in found:
        print("compiled backend not built; nothing to compare", file=sys.stderr)
        return 1
    py, cy = found["python"], found["cython"]
    rows = []
    for name, fn in kernel_cases(args.quick):
        t_p, out_p = _best_of(lambda: fn(py), 1 if not args.quick else args.repeat)
        t_c, out_c = _best_of(lambda: fn(cy), args.repeat)
        rows.append((name, t_p, t_c, _same(out_p, out_c)))
    rows.append(search_case(args.quick, args.repeat))

    print(f"{'kernel':<28}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}  equal")
    for name, t_p, t_c, same in rows:
        print(f"{name:<28}{t_p:>12.4f}{t_c:>12.5f}{t_p / t_c:>9.0f}x  {same}")
    return 0 if all(r[3] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
