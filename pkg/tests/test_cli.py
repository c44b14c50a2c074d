import json
import sys

import pytest

from conftest import DOUBLE
from qbb.cli import main


def _gen(tmp_path, name="x.qubo", n=9, seed=0):
    path = tmp_path / name
    assert main(["gen", "xorsat", "--n", str(n), "--seed", str(seed), "-o", str(path)]) == 0
    return path


def test_gen_and_solve_json(tmp_path, capsys):
    path = _gen(tmp_path)
    capsys.readouterr()
    assert main(["solve", str(path), "--json", "--mip-start-oracle", "sa", "--top-k", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "Optimal" and out["best_value"] == 0.0
    assert len(out["assignment"]) == 18


def test_solve_all_flags(tmp_path, capsys):
    path = _gen(tmp_path)
    ext = f"external:{sys.executable} {DOUBLE}"
    code = main(["solve", str(path), "--branching", "index", "--node-selection", "dfs", "--time-limit", "10",
                 "--mip-start-oracle", ext, "--callback-pool", "tabu", "--oracle-capacity", "100",
                 "--seed", "3", "--num-reads", "4", "--budget", "20"])
    assert code == 0
    assert "status: Optimal" in capsys.readouterr().out


def test_gen_random(tmp_path, capsys):
    path = tmp_path / "r.qubo"
    assert main(["gen", "random", "--n", "6", "--density", "1", "-o", str(path)]) == 0
    assert path.read_text().splitlines()[1] == "6 21"


def test_exit_codes(tmp_path, capsys):
    path = _gen(tmp_path)
    assert main(["solve", str(tmp_path / "missing.qubo")]) == 3
    bad = tmp_path / "bad.qubo"
    bad.write_text("2 1\n0 5 1\n")
    assert main(["solve", str(bad)]) == 3
    assert "bad.qubo:2:" in capsys.readouterr().err
    assert main(["solve", str(path), "--mip-start-oracle", "quantum"]) == 2
    assert main(["solve", str(path), "--mip-start-oracle", f"external:{sys.executable} {DOUBLE} crash"]) == 3
    assert main(["gen", "xorsat", "--n", "4", "--k", "4", "-o", str(tmp_path / "y.qubo")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(path), "--branching", "random"])
    assert exc.value.code == 2


def test_capacity_gate_warns_and_solves(tmp_path, capsys):
    path = _gen(tmp_path)
    assert main(["solve", str(path), "--mip-start-oracle", "sa", "--oracle-capacity", "4"]) == 0
    captured = capsys.readouterr()
    assert "skipped" in captured.err and "status: Optimal" in captured.out


def test_bench_and_report(tmp_path, capsys):
    inst = tmp_path / "inst"
    inst.mkdir()
    for s in range(2):
        _gen(inst, f"x{s}.qubo", seed=s)
    matrix = tmp_path / "matrix.json"
    matrix.write_text(json.dumps([{"name": "Baseline"}, {"name": "Branch Priority", "branching": "degree"},
                                  {"name": "Best", "heuristic": "Best Solution", "injection": "best_solution"}]))
    log = tmp_path / "rec.log"
    args = ["bench", "--instances", str(inst), "--matrix", str(matrix), "--time-limit", "5", "-o", str(log)]
    assert main(args) == 0
    assert main(args) == 0
    assert len(log.read_text().splitlines()) == 6
    capsys.readouterr()
    assert main(["report", str(log), "--baseline", "Baseline", "--format", "md"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("| Strategy | Heuristic | # solved instances | Node Count | Runtime [s] |")
    assert main(["report", str(log), "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("strategy,heuristic,solved")
    assert main(["report", str(log), "--baseline", "Nope"]) == 2
    assert main(["report", str(tmp_path / "none.log")]) == 3
    assert main(["report", str(log), "--filter-threshold", "1000"]) == 0


def test_bench_bad_matrix(tmp_path):
    inst = tmp_path / "inst"
    inst.mkdir()
    _gen(inst)
    matrix = tmp_path / "m.json"
    matrix.write_text("[]")
    assert main(["bench", "--instances", str(inst), "--matrix", str(matrix), "-o", str(tmp_path / "l")]) == 2
    assert main(["bench", "--instances", str(tmp_path / "empty"), "-o", str(tmp_path / "l")]) == 3
