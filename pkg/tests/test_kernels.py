"""The compiled and pure-Python backends must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from qbb import engine, kernels
from qbb.engine import SolverConfig, solve
from qbb.instances import gen_random, gen_xorsat
from qbb.model import FREE
from qbb.oracles import OracleConfig, simulated_annealing, tabu_search

BACKENDS = kernels.backends()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")


def _arrays(m):
    return (m.linear,) + m.csr


@needs_cython
@pytest.mark.parametrize("seed", range(10))
def test_flip_deltas_descend_and_bound_agree(seed):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    m = gen_random(12, density=0.5, coef_range=7, seed=seed)
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, m.n).astype(np.uint8)
    np.testing.assert_array_equal(py.flip_deltas(*_arrays(m), x), cy.flip_deltas(*_arrays(m), x))
    np.testing.assert_array_equal(py.descend(*_arrays(m), x.copy()), cy.descend(*_arrays(m), x.copy()))
    states = rng.choice([FREE, 0, 1], size=m.n).astype(np.int8)
    lp, lc = np.empty(m.n), np.empty(m.n)
    assert py.node_bound(*_arrays(m), states, lp) == cy.node_bound(*_arrays(m), states, lc)
    np.testing.assert_array_equal(lp[states == FREE], lc[states == FREE])


@needs_cython
@pytest.mark.parametrize("seed", range(5))
def test_anneal_and_tabu_agree(seed):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    m = gen_random(10, density=0.7, coef_range=5, seed=seed)
    rng = np.random.default_rng(seed)
    reads, budget = 4, 20
    x0 = rng.integers(0, 2, (reads, m.n)).astype(np.uint8)
    order = np.argsort(rng.random((reads, budget, m.n)), axis=2).astype(np.int32)
    u = rng.random((reads, budget, m.n))
    temps = np.geomspace(5.0, 0.005, budget)
    np.testing.assert_array_equal(py.anneal(*_arrays(m), x0, order, u, temps),
                                  cy.anneal(*_arrays(m), x0, order, u, temps))
    np.testing.assert_array_equal(py.tabu(*_arrays(m), x0, 50, 3), cy.tabu(*_arrays(m), x0, 50, 3))


def _py_solve(monkeypatch, model, cfg):
    monkeypatch.setattr(engine.kernels, "HAS_SEARCH", False)
    res = solve(model, cfg)
    monkeypatch.undo()
    return res


@needs_cython
@pytest.mark.parametrize("selection", ["best-bound", "dfs", "bfs"])
@pytest.mark.parametrize("branching", ["degree", "index"])
def test_search_paths_agree(monkeypatch, selection, branching):
    for seed in range(6):
        m = gen_random(11, density=0.5, coef_range=9, seed=100 + seed)
        pool = simulated_annealing(m, OracleConfig(seed=seed, num_reads=8, budget=5))
        for extra in ({}, {"callback_pool": pool}, {"mip_start": pool[:1]}, {"root_heuristic": False}):
            cfg = SolverConfig(node_selection=selection, branching=branching, **extra)
            a = solve(m, cfg)
            b = _py_solve(monkeypatch, m, cfg)
            assert (a.status, a.best_value, a.nodes_explored) == (b.status, b.best_value, b.nodes_explored)
            np.testing.assert_array_equal(a.best_assignment, b.best_assignment)
            assert a.injection_stats == b.injection_stats


@needs_cython
def test_search_paths_agree_on_node_limit(monkeypatch):
    m = gen_xorsat(12, seed=3).model
    cfg = SolverConfig(node_limit=500, branching="index")
    a, b = solve(m, cfg), _py_solve(monkeypatch, m, cfg)
    assert a.status.value == b.status.value == "NodeLimit"
    assert a.nodes_explored == b.nodes_explored == 500
    assert a.best_value == b.best_value


def test_pure_python_backend_selected_by_env():
    code = ("import qbb, numpy as np\n"
            "from qbb.engine import solve\n"
            "from qbb.model import QuboModel\n"
            "m = QuboModel(4, {(0, 1): 4, (0, 2): -2, (0, 3): -8, (1, 3): -4, (2, 3): 8})\n"
            "r = solve(m)\n"
            "print(qbb.BACKEND, r.best_value, r.status.value)\n")
    env = dict(os.environ, QBB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "-8.0", "Optimal"]


def test_oracle_pools_identical_across_backends():
    m = gen_random(9, density=0.6, coef_range=6, seed=4)
    code = ("import sys, qbb\n"
            "from qbb.instances import gen_random\n"
            "from qbb.oracles import OracleConfig, simulated_annealing, tabu_search\n"
            "m = gen_random(9, density=0.6, coef_range=6, seed=4)\n"
            "a = simulated_annealing(m, OracleConfig(seed=1, num_reads=5, budget=30))\n"
            "b = tabu_search(m, OracleConfig(kind='tabu', seed=1, num_reads=5, budget=30))\n"
            "sys.stdout.write((a.to_bytes() + b.to_bytes()).hex())\n")
    env = dict(os.environ, QBB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    here = (simulated_annealing(m, OracleConfig(seed=1, num_reads=5, budget=30)).to_bytes()
            + tabu_search(m, OracleConfig(kind="tabu", seed=1, num_reads=5, budget=30)).to_bytes())
    assert out.stdout == here.hex()


@needs_cython
def test_backend_benchmark_smoke():
    import importlib.util
    path = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    assert mod.main(["--quick", "--repeat", "1"]) == 0
