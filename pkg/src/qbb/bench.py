"""Benchmark harness: strategy x instance matrix, SGM aggregation, reports.

Records are appended to a line-delimited JSON log as they complete, so an
interrupted matrix resumes where it stopped.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import Branching, NodeSelection, SolverConfig, Status, solve
from .instances import load_model, read_planted
from .model import QuboModel
from .oracles import CapacityExceeded, OracleConfig, OracleError, SolutionPool, run_oracle, top_k

log = logging.getLogger(__name__)

__all__ = [
    "Injection",
    "StrategySpec",
    "RunRecord",
    "BenchInstance",
    "sgm",
    "run_matrix",
    "filter_instances",
    "report",
    "format_delta",
    "load_matrix",
    "default_matrix",
    "load_instances",
    "read_records",
]

SGM_SHIFT = 10.0
FAILED = "Failed"


class Injection(str, enum.Enum):
    NONE = "none"
    MIP_START = "mip_start"
    CALLBACK = "callback"
    BEST_SOLUTION = "best_solution"


@dataclass(frozen=True)
class StrategySpec:
    name: str
    heuristic: str = "-"
    branching: Branching = Branching.INDEX_ORDER
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    injection: Injection = Injection.NONE
    oracle: str | None = None
    top_k: int | None = None
    num_reads: int = 100
    budget: int = 100
    capacity: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "branching", Branching(self.branching))
        object.__setattr__(self, "node_selection", NodeSelection(self.node_selection))
        object.__setattr__(self, "injection", Injection(self.injection))
        if self.injection in (Injection.MIP_START, Injection.CALLBACK) and not self.oracle:
            raise ValueError(f"strategy {self.name!r}: injection {self.injection.value} needs an oracle")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError(f"strategy {self.name!r}: top_k must be positive")

    def oracle_config(self, seed: int) -> OracleConfig:
        return OracleConfig.parse(self.oracle, seed=seed, num_reads=self.num_reads,
                                  budget=self.budget, capacity=self.capacity)

    @classmethod
    def from_dict(cls, d: dict) -> "StrategySpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown strategy keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RunRecord:
    instance_id: str
    strategy: str
    heuristic: str
    status: str
    wall_time: float
    reported_time: float
    nodes_explored: int
    best_value: float | None
    seed: int
    time_limit: float
    oracle_time: float = 0.0
    best_bits: str | None = None
    note: str | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.instance_id, self.strategy, self.seed)

    @property
    def solved(self) -> bool:
        return self.status == Status.OPTIMAL.value

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


@dataclass(frozen=True)
class BenchInstance:
    id: str
    model: QuboModel
    planted: np.ndarray | None = field(default=None, compare=False)


def reported_time(status: str, wall_time: float, time_limit: float) -> float:
    """Unsolved runs count as the full time limit."""
    if status == Status.OPTIMAL.value:
        return min(wall_time, time_limit)
    return time_limit


def sgm(values: Iterable[float], shift: float = SGM_SHIFT) -> float:
    """Shifted geometric mean ``prod(v + shift) ** (1 / n) - shift``, in log space."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("sgm of an empty sequence")
    if shift < 0:
        raise ValueError("shift must be non-negative")
    if any(v < 0 for v in vals):
        raise ValueError("sgm needs non-negative values")
    if shift == 0.0:
        if any(v == 0.0 for v in vals):
            return 0.0
        return math.exp(math.fsum(math.log(v) for v in vals) / len(vals))
    # shift * expm1(mean(log1p(v / shift))) is exact at zero and avoids the
    # cancellation in exp(...) - shift
    return shift * math.expm1(math.fsum(math.log1p(v / shift) for v in vals) / len(vals))


def format_delta(value: float, baseline: float) -> str:
    if baseline == 0:
        return "n/a"
    return f"{(value / baseline - 1.0) * 100:+.1f}%"


def read_records(path) -> list[RunRecord]:
    if not os.path.exists(path):
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(RunRecord.from_json(line))
            except (json.JSONDecodeError, TypeError) as exc:
                # a torn final line from an interrupted run is dropped
                log.warning("%s:%d: skipping unreadable record (%s)", path, lineno, exc)
    return out


def _open_log(path):
    fh = open(path, "a+", encoding="utf-8")
    if fh.tell() > 0:
        fh.seek(fh.tell() - 1)
        if fh.read(1) != "\n":
            # terminate a torn record so the next one starts on its own line
            fh.write("\n")
    return fh


def _bits_str(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def _reference_solution(inst: BenchInstance, prior: Sequence[RunRecord], time_limit: float) -> np.ndarray:
    """Best known solution: planted, else best solved record, else a fresh exact solve."""
    if inst.planted is not None:
        return np.asarray(inst.planted, dtype=np.uint8)
    solved = [r for r in prior if r.instance_id == inst.id and r.best_bits and r.best_value is not None]
    if solved:
        best = min(solved, key=lambda r: r.best_value)
        return np.frombuffer(best.best_bits.encode(), dtype=np.uint8) - ord("0")
    res = solve(inst.model, SolverConfig(time_limit=time_limit))
    return res.best_assignment


def _run_instance(inst: BenchInstance, strategies: Sequence[StrategySpec], time_limit: float,
                  seeds: Sequence[int], node_limit: int | None, done: set, prior: Sequence[RunRecord],
                  sink=None) -> list[RunRecord]:
    pools: dict[tuple, tuple[SolutionPool | None, float, str | None]] = {}
    records: list[RunRecord] = []
    history = list(prior)
    ordered = sorted(strategies, key=lambda s: s.injection is Injection.BEST_SOLUTION)
    for seed in seeds:
        for spec in ordered:
            if (inst.id, spec.name, seed) in done:
                continue
            try:
                rec = _run_one(inst, spec, time_limit, seed, node_limit, pools, history)
            except Exception as exc:  # noqa: BLE001 - a failed run must not stop the matrix
                log.exception("run %s / %s / seed %d failed", inst.id, spec.name, seed)
                rec = RunRecord(inst.id, spec.name, spec.heuristic, FAILED, 0.0, time_limit, 0, None,
                                seed, time_limit, note=f"{type(exc).__name__}: {exc}")
            records.append(rec)
            history.append(rec)
            if sink is not None:
                sink(rec)
    return records


def _run_one(inst, spec: StrategySpec, time_limit, seed, node_limit, pools, history) -> RunRecord:
    model = inst.model
    mip_start = callback = None
    oracle_time = 0.0
    note = None
    if spec.injection in (Injection.MIP_START, Injection.CALLBACK):
        key = (spec.oracle, spec.num_reads, spec.budget, spec.capacity, seed)
        if key not in pools:
            # pools are built once per instance and oracle, before any search
            t0 = time.perf_counter()
            try:
                pool, err = run_oracle(model, spec.oracle_config(seed)), None
            except CapacityExceeded as exc:
                pool, err = None, f"oracle declined: {exc}"
            except OracleError as exc:
                pool, err = None, f"oracle failed: {exc}"
            pools[key] = (pool, time.perf_counter() - t0, err)
        pool, oracle_time, note = pools[key]
        if pool is not None:
            if spec.injection is Injection.MIP_START:
                mip_start = top_k(pool, spec.top_k) if spec.top_k else pool
            else:
                callback = top_k(pool, spec.top_k) if spec.top_k else pool
    elif spec.injection is Injection.BEST_SOLUTION:
        best = _reference_solution(inst, history, time_limit)
        mip_start = SolutionPool.from_samples(model, [best])
    cfg = SolverConfig(time_limit=time_limit, node_selection=spec.node_selection, branching=spec.branching,
                       mip_start=mip_start, callback_pool=callback, node_limit=node_limit)
    res = solve(model, cfg)
    status = res.status.value
    return RunRecord(
        instance_id=inst.id,
        strategy=spec.name,
        heuristic=spec.heuristic,
        status=status,
        wall_time=res.wall_time,
        reported_time=reported_time(status, res.wall_time, time_limit),
        nodes_explored=res.nodes_explored,
        best_value=res.best_value,
        seed=seed,
        time_limit=time_limit,
        oracle_time=oracle_time,
        best_bits=_bits_str(res.best_assignment),
        note=note,
    )


def run_matrix(instances: Sequence[BenchInstance], strategies: Sequence[StrategySpec], time_limit: float = 30.0,
               seeds: Sequence[int] = (0,), node_limit: int | None = None, log_path=None,
               jobs: int = 1) -> list[RunRecord]:
    """Run every (instance, strategy, seed) triple not already in ``log_path``.

    Returns all records of the matrix in instance, seed, strategy order,
    including the ones reused from the log.
    """
    if not instances or not strategies or not seeds:
        raise ValueError("run_matrix needs at least one instance, strategy and seed")
    names = [s.name for s in strategies]
    if len(set(names)) != len(names):
        raise ValueError("strategy names must be unique")
    if time_limit <= 0:
        raise ValueError("time_limit must be positive")
    prior = read_records(log_path) if log_path else []
    done = {r.key for r in prior}
    latest = {r.key: r for r in prior}
    log_fh = _open_log(log_path) if log_path else None

    def sink(rec: RunRecord):
        latest[rec.key] = rec
        if log_fh is not None:
            log_fh.write(rec.to_json() + "\n")
            log_fh.flush()

    try:
        if jobs <= 1:
            for inst in instances:
                _run_instance(inst, strategies, time_limit, seeds, node_limit, done,
                              [r for r in prior if r.instance_id == inst.id], sink)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_run_instance, inst, strategies, time_limit, seeds, node_limit, done,
                                       [r for r in prior if r.instance_id == inst.id])
                           for inst in instances]
                for fut in as_completed(futures):
                    for rec in fut.result():
                        sink(rec)
    finally:
        if log_fh is not None:
            log_fh.close()
    return [latest[(inst.id, s.name, seed)] for inst in instances for seed in seeds for s in strategies
            if (inst.id, s.name, seed) in latest]


def filter_instances(records: Sequence[RunRecord], threshold_s: float, baseline: str = "Baseline") -> set[str]:
    """Instances whose baseline takes longer than ``threshold_s`` and that at
    least one strategy solves to optimality."""
    base = [r for r in records if r.strategy == baseline]
    if not base:
        raise ValueError(f"no records for baseline strategy {baseline!r}")
    slow = {r.instance_id for r in base if r.reported_time > threshold_s}
    solved = {r.instance_id for r in records if r.solved}
    return slow & solved


@dataclass
class ReportRow:
    strategy: str
    heuristic: str
    solved: int
    runs: int
    sgm_nodes: float
    sgm_time: float
    node_delta: float | None
    time_delta: float | None


def summarize(records: Sequence[RunRecord], baseline: str = "Baseline",
              instances: set[str] | None = None, shift: float = SGM_SHIFT) -> list[ReportRow]:
    recs = [r for r in records if instances is None or r.instance_id in instances]
    order: list[str] = []
    for r in recs:
        if r.strategy not in order:
            order.append(r.strategy)
    if baseline not in order:
        raise ValueError(f"baseline strategy {baseline!r} not found in records")
    rows = []
    for name in order:
        mine = [r for r in recs if r.strategy == name]
        rows.append(ReportRow(
            strategy=name,
            heuristic=mine[0].heuristic,
            solved=sum(r.solved for r in mine),
            runs=len(mine),
            sgm_nodes=sgm([r.nodes_explored for r in mine], shift),
            sgm_time=sgm([r.reported_time for r in mine], shift),
            node_delta=None,
            time_delta=None,
        ))
    base = rows[order.index(baseline)]
    for row in rows:
        if row.strategy != baseline:
            row.node_delta = row.sgm_nodes / base.sgm_nodes - 1.0 if base.sgm_nodes else None
            row.time_delta = row.sgm_time / base.sgm_time - 1.0 if base.sgm_time else None
    return rows


def _cell(value: float, delta: float | None, digits: int) -> str:
    if delta is None:
        return f"{value:.{digits}f}"
    return f"{value:.{digits}f} ({delta * 100:+.1f}%)"


def report(records: Sequence[RunRecord], baseline: str = "Baseline", fmt: str = "md",
           instances: set[str] | None = None, shift: float = SGM_SHIFT) -> str:
    rows = summarize(records, baseline, instances, shift)
    header = ["Strategy", "Heuristic", "# solved instances", "Node Count", "Runtime [s]"]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["strategy", "heuristic", "solved", "runs", "sgm_nodes", "node_delta_pct",
                    "sgm_time", "time_delta_pct"])
        for r in rows:
            w.writerow([r.strategy, r.heuristic, r.solved, r.runs, f"{r.sgm_nodes:.1f}",
                        "" if r.node_delta is None else f"{r.node_delta * 100:+.1f}",
                        f"{r.sgm_time:.3f}", "" if r.time_delta is None else f"{r.time_delta * 100:+.1f}"])
        return buf.getvalue()
    body = [[r.strategy, r.heuristic, str(r.solved), _cell(r.sgm_nodes, r.node_delta, 1),
             _cell(r.sgm_time, r.time_delta, 3)] for r in rows]
    n_inst = len({r.instance_id for r in records if instances is None or r.instance_id in instances})
    footer = (f"SGM{shift:g} over {n_inst} instances; unsolved runs count the full time limit, "
              f"their node counts are taken as recorded.")
    if fmt == "md":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in body]
        return "\n".join(lines) + "\n\n" + footer + "\n"
    if fmt == "text":
        widths = [max(len(x) for x in col) for col in zip(header, *body)]
        fmt_row = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))  # noqa: E731
        return "\n".join([fmt_row(header), fmt_row(["-" * w for w in widths])] + [fmt_row(b) for b in body]) \
            + "\n" + footer + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def load_matrix(path) -> list[StrategySpec]:
    """Strategies from a JSON file: a list of objects or ``{"strategies": [...]}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("strategies")
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a non-empty list of strategies")
    specs = [StrategySpec.from_dict(d) for d in data]
    if len({s.name for s in specs}) != len(specs):
        raise ValueError(f"{path}: strategy names must be unique")
    return specs


def default_matrix() -> list[StrategySpec]:
    S = StrategySpec
    mip, cb, best = Injection.MIP_START, Injection.CALLBACK, Injection.BEST_SOLUTION
    deg = Branching.DEGREE_PRIORITY
    rows = [S("Baseline"), S("Branch Priority", branching=deg)]
    for k in (1, 10, 30, 100):
        rows.append(S(f"MIP Start SA TOP{k}", f"SA TOP{k}", injection=mip, oracle="sa", top_k=k))
    rows += [
        S("MIP Start Tabu TOP1", "Tabu TOP1", injection=mip, oracle="tabu", top_k=1, num_reads=20, budget=200),
        S("MIP Start Greedy", "Greedy", injection=mip, oracle="greedy", top_k=1, num_reads=10),
        S("MIP Start Best Solution", "Best Solution", injection=best),
        S("MIP Start + Branch Priority SA TOP10", "SA TOP10", branching=deg, injection=mip, oracle="sa", top_k=10),
        S("MIP Start + Branch Priority Best Solution", "Best Solution", branching=deg, injection=best),
        S("Heuristic Callback SA", "SA", injection=cb, oracle="sa"),
        S("Heuristic Callback Tabu", "Tabu", injection=cb, oracle="tabu", num_reads=20, budget=200),
    ]
    return rows


def load_instances(directory, pattern: str = "*.qubo") -> list[BenchInstance]:
    paths = sorted(Path(directory).glob(pattern))
    if not paths:
        raise FileNotFoundError(f"no instance files matching {pattern!r} in {directory}")
    out = []
    for p in paths:
        model = load_model(p)
        planted = read_planted(p)
        if planted is not None and len(planted) != model.n:
            planted = None
        out.append(BenchInstance(p.stem, model, planted))
    return out
