import json
import math

import numpy as np
import pytest

from conftest import eq3_model
from qbb import bench
from qbb.bench import (
    BenchInstance,
    Injection,
    RunRecord,
    StrategySpec,
    default_matrix,
    filter_instances,
    load_matrix,
    read_records,
    report,
    reported_time,
    run_matrix,
    sgm,
)
from qbb.instances import gen_random, gen_xorsat


def _rec(inst, strategy, t, nodes, status="Optimal", limit=30.0, heuristic="-"):
    return RunRecord(inst, strategy, heuristic, status, t, reported_time(status, t, limit), nodes, 0.0, 0, limit)


def test_sgm_values():
    assert sgm([7.5], 10) == pytest.approx(7.5)
    assert sgm([0, 0], 10) == 0
    assert sgm([0, 90], 10) == pytest.approx(math.sqrt(1000) - 10, abs=1e-9)
    assert sgm([3.3] * 7, 4) == pytest.approx(3.3, abs=1e-12)
    assert sgm([2, 8], 0) == pytest.approx(4.0)
    assert sgm([1e300, 1e300], 10) == pytest.approx(1e300)
    assert sgm([1, 5], 10) < sgm([1, 6], 10)
    with pytest.raises(ValueError):
        sgm([])
    with pytest.raises(ValueError):
        sgm([1], -1)


def test_reported_time_rule():
    assert reported_time("Optimal", 4.2, 30) == 4.2
    assert reported_time("Optimal", 31.0, 30) == 30
    assert reported_time("TimeLimit", 30.4, 30) == 30
    assert reported_time("NodeLimit", 0.3, 30) == 30


def test_report_formats_signed_delta():
    recs = [_rec("a", "Baseline", 1.0, 28170.0), _rec("a", "Branch Priority", 1.0, 23304.8),
            _rec("a", "Heuristic Callback", 1.0, 56114.6)]
    md = report(recs, "Baseline", "md", shift=0.0)
    assert "23304.8 (-17.3%)" in md
    assert "(+99.2%)" in md
    base_line = next(line for line in md.splitlines() if line.startswith("| Baseline"))
    assert "%" not in base_line
    csv_text = report(recs, "Baseline", "csv", shift=0.0)
    row = next(r for r in csv_text.splitlines() if r.startswith("Branch Priority"))
    assert row.split(",")[5] == "-17.3"
    assert "Node Count" in report(recs, "Baseline", "text")
    with pytest.raises(ValueError):
        report(recs, "Nope")
    with pytest.raises(ValueError):
        report(recs, "Baseline", "html")


def test_report_deltas_match_raw_records():
    rng = np.random.default_rng(0)
    recs = []
    for i in range(12):
        for s in ("Baseline", "X"):
            recs.append(_rec(f"i{i}", s, float(rng.uniform(0, 5)), int(rng.integers(1, 10_000))))
    rows = {r.strategy: r for r in bench.summarize(recs, "Baseline")}
    raw = sgm([r.nodes_explored for r in recs if r.strategy == "X"]) / \
        sgm([r.nodes_explored for r in recs if r.strategy == "Baseline"]) - 1
    assert f"{rows['X'].node_delta * 100:+.1f}" == f"{raw * 100:+.1f}"


def test_filter_instances():
    recs = [
        _rec("fast", "Baseline", 5, 10, limit=100),
        _rec("slow", "Baseline", 15, 10, limit=100),
        _rec("hard", "Baseline", 100, 10, status="TimeLimit", limit=100),
        _rec("hard", "Other", 100, 10, status="TimeLimit", limit=100),
        _rec("hard2", "Baseline", 100, 10, status="TimeLimit", limit=100),
        _rec("hard2", "Other", 40, 10, limit=100),
    ]
    assert filter_instances(recs, 10, "Baseline") == {"slow", "hard2"}
    with pytest.raises(ValueError):
        filter_instances(recs, 10, "Missing")


def test_strategy_validation():
    with pytest.raises(ValueError):
        StrategySpec("x", injection="mip_start")
    with pytest.raises(ValueError):
        StrategySpec("x", injection="mip_start", oracle="sa", top_k=0)
    with pytest.raises(ValueError):
        StrategySpec("x", node_selection="nope")
    names = [s.name for s in default_matrix()]
    assert len(names) == len(set(names)) and names[0] == "Baseline"


def test_load_matrix(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"strategies": [{"name": "Baseline"},
                                            {"name": "BP", "branching": "degree"}]}))
    specs = load_matrix(p)
    assert [s.name for s in specs] == ["Baseline", "BP"]
    p.write_text(json.dumps([{"name": "A"}, {"name": "A"}]))
    with pytest.raises(ValueError):
        load_matrix(p)
    p.write_text(json.dumps([{"name": "A", "colour": "red"}]))
    with pytest.raises(ValueError):
        load_matrix(p)


def _instances():
    return [BenchInstance("r1", gen_random(8, seed=1)), BenchInstance("r2", gen_random(9, seed=2))]


def _strategies():
    return [StrategySpec("Baseline"), StrategySpec("BP", branching="degree"),
            StrategySpec("SA", "SA TOP1", injection="mip_start", oracle="sa", top_k=1, num_reads=5, budget=10)]


def test_matrix_cardinality_and_resume(tmp_path, monkeypatch):
    log = tmp_path / "rec.log"
    first = run_matrix(_instances(), _strategies(), time_limit=5, log_path=log)
    assert len(first) == 6
    lines = log.read_text().splitlines()
    # interrupt after record 4: drop the last two and leave a torn line
    log.write_text("\n".join(lines[:4]) + "\n" + lines[4][:10])
    calls = []
    real = bench._run_one
    monkeypatch.setattr(bench, "_run_one", lambda *a, **k: calls.append(a[1].name) or real(*a, **k))
    second = run_matrix(_instances(), _strategies(), time_limit=5, log_path=log)
    assert len(calls) == 2
    assert [r.key for r in second] == [r.key for r in first]
    assert [r.nodes_explored for r in second] == [r.nodes_explored for r in first]
    assert len(read_records(log)) == 6


def test_failed_run_is_recorded_and_matrix_continues(monkeypatch):
    real = bench._run_one

    def flaky(inst, spec, *a):
        if spec.name == "BP" and inst.id == "r1":
            raise RuntimeError("boom")
        return real(inst, spec, *a)

    monkeypatch.setattr(bench, "_run_one", flaky)
    recs = run_matrix(_instances(), _strategies(), time_limit=5)
    failed = [r for r in recs if r.status == "Failed"]
    assert len(recs) == 6 and len(failed) == 1
    assert failed[0].note == "RuntimeError: boom"


def test_capacity_declined_pool_still_solves():
    spec = StrategySpec("SA", injection="mip_start", oracle="sa", capacity=3)
    (rec,) = run_matrix([BenchInstance("eq3", eq3_model())], [spec], time_limit=5)
    assert rec.status == "Optimal" and rec.best_value == -8
    assert rec.note.startswith("oracle declined")


def test_best_solution_injection_dominates_baseline_on_eq3():
    recs = run_matrix([BenchInstance("eq3", eq3_model())],
                      [StrategySpec("Baseline"), StrategySpec("Best", injection=Injection.BEST_SOLUTION)],
                      time_limit=5)
    base, best = recs
    assert best.nodes_explored <= base.nodes_explored
    assert best.best_value == base.best_value == -8


def test_best_solution_uses_planted():
    inst = gen_xorsat(9, seed=1)
    recs = run_matrix([BenchInstance("x", inst.model, inst.planted)],
                      [StrategySpec("Best", injection="best_solution")], time_limit=5)
    assert recs[0].best_value == 0


def test_parallel_matches_sequential(tmp_path):
    seq = run_matrix(_instances(), _strategies(), time_limit=5, seeds=(0, 1))
    par = run_matrix(_instances(), _strategies(), time_limit=5, seeds=(0, 1), jobs=2,
                     log_path=tmp_path / "p.log")
    assert [(r.key, r.nodes_explored, r.best_value) for r in seq] == \
        [(r.key, r.nodes_explored, r.best_value) for r in par]


def test_run_matrix_validation():
    with pytest.raises(ValueError):
        run_matrix([], _strategies())
    with pytest.raises(ValueError):
        run_matrix(_instances(), [StrategySpec("A"), StrategySpec("A")])
