"""Exact branch-and-bound for QUBO.

The loop follows the classical scheme: bound, fathom, select, branch.  Three
hooks carry outside solutions into the tree:

* a MIP start: pool entries offered as incumbents before the root is solved;
* a root branching order derived from variable degrees in the interaction
  graph;
* a heuristic callback that, at every expanded node, offers the best entry
  of an a-priori solution pool that agrees with the node's fixings.

Node bounds are the term-wise bound of the reduced subproblem.  A node whose
reduced model has no bilinear terms left is separable and is completed
exactly instead of being branched on.
"""

from __future__ import annotations

import enum
import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .bounding import round_and_repair
from .model import FREE, PartialAssignment, QuboModel, as_assignment, branch_priority, evaluate
from .oracles import SolutionPool

__all__ = [
    "NodeSelection",
    "Branching",
    "Status",
    "Node",
    "SolverConfig",
    "SolveResult",
    "InjectionStats",
    "Solver",
    "solve",
    "select_branch_var",
]


class NodeSelection(str, enum.Enum):
    BEST_BOUND = "best-bound"
    DEPTH_FIRST = "dfs"
    BREADTH_FIRST = "bfs"


class Branching(str, enum.Enum):
    DEGREE_PRIORITY = "degree"
    INDEX_ORDER = "index"


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    TIME_LIMIT = "TimeLimit"
    NODE_LIMIT = "NodeLimit"


@dataclass(eq=False)
class Node:
    states: np.ndarray
    lower_bound: float
    depth: int
    id: int
    free_edges: int
    parent_bound: float = -math.inf

    @property
    def pa(self) -> PartialAssignment:
        return PartialAssignment(self.states)


@dataclass(frozen=True)
class SolverConfig:
    time_limit: float = math.inf
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    branching: Branching = Branching.DEGREE_PRIORITY
    mip_start: SolutionPool | None = None
    callback_pool: SolutionPool | None = None
    node_limit: int | None = None
    # seed the incumbent with a rounded-and-descended all-0.5 hint
    root_heuristic: bool = True
    # assert bound monotonicity on every child (test builds)
    check_invariants: bool = False
    # called as trace(event, node, incumbent_value) with event in
    # {"expand", "fathom", "leaf"}
    trace: Callable | None = None

    def __post_init__(self):
        object.__setattr__(self, "node_selection", NodeSelection(self.node_selection))
        object.__setattr__(self, "branching", Branching(self.branching))
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be at least 1")


@dataclass
class InjectionStats:
    accepted: int = 0
    rejected: int = 0
    mip_start_accepted: int = 0
    callback_accepted: int = 0
    callback_rejected: int = 0


@dataclass
class SolveResult:
    status: Status
    best_value: float
    best_assignment: np.ndarray | None
    nodes_explored: int
    wall_time: float
    injection_stats: InjectionStats = field(default_factory=InjectionStats)
    root_bound: float = -math.inf


def select_branch_var(states: np.ndarray, order: np.ndarray) -> int:
    """First free variable in ``order`` (a static ranking of all variables)."""
    free = states[order] == FREE
    k = int(np.argmax(free))
    if not free[k]:
        raise ValueError("node has no free variable")
    return int(order[k])


def branch_order(model: QuboModel, branching: Branching) -> np.ndarray:
    """Static variable ranking: degree descending then index, or plain index."""
    if Branching(branching) is Branching.INDEX_ORDER:
        return np.arange(model.n)
    prio = branch_priority(model)
    return np.lexsort((np.arange(model.n), -prio))


class Solver:
    """One branch-and-bound run.  Not reusable once :meth:`run` returns."""

    def __init__(self, model: QuboModel, cfg: SolverConfig | None = None):
        self.model = model
        self.cfg = cfg or SolverConfig()
        self.stats = InjectionStats()
        self.incumbent_value = math.inf
        self.incumbent: np.ndarray | None = None
        self._next_id = 0
        self._order = branch_order(model, self.cfg.branching)
        self._csr = model.csr
        self._lin_buf = np.empty(model.n)

    def offer_incumbent(self, x, source: str = "") -> bool:
        """Accept ``x`` iff its re-evaluated objective strictly beats the incumbent.

        Offers tagged with a ``source`` are counted in the injection stats.
        """
        bits = as_assignment(self.model, x)
        accepted = self._accept(bits, evaluate(self.model, bits))
        if source:
            if accepted:
                self.stats.accepted += 1
                if source == "mip_start":
                    self.stats.mip_start_accepted += 1
            else:
                self.stats.rejected += 1
        return accepted

    def _make_node(self, states: np.ndarray, depth: int, parent_bound: float) -> Node:
        indptr, indices, weights = self._csr
        _, bound, free_edges = kernels.node_bound(self.model.linear, indptr, indices, weights,
                                                  states, self._lin_buf)
        bound = bound + self.model.offset
        if self.cfg.check_invariants and bound < parent_bound - 1e-9 * max(1.0, abs(parent_bound)):
            raise AssertionError(f"child bound {bound} below parent bound {parent_bound}")
        node = Node(states, max(bound, parent_bound), depth, self._next_id, free_edges, parent_bound)
        self._next_id += 1
        return node

    def _complete(self, node: Node) -> tuple[np.ndarray, float]:
        """Optimal completion of a separable node and its value."""
        indptr, indices, weights = self._csr
        _, bound, _ = kernels.node_bound(self.model.linear, indptr, indices, weights,
                                         node.states, self._lin_buf)
        bits = node.states.astype(np.int16)
        free = bits == FREE
        bits[free] = self._lin_buf[free] < 0.0
        return bits.astype(np.uint8), bound + self.model.offset

    def _key(self, node: Node):
        sel = self.cfg.node_selection
        if sel is NodeSelection.BEST_BOUND:
            return (node.lower_bound, node.id)
        if sel is NodeSelection.DEPTH_FIRST:
            return (-node.depth, node.id)
        return (node.depth, node.id)

    def _accept(self, bits: np.ndarray, value: float) -> bool:
        if value < self.incumbent_value:
            self.incumbent_value = value
            self.incumbent = np.array(bits, dtype=np.uint8)
            return True
        return False

    def _search_py(self, deadline: float) -> tuple[Status, int, float]:
        """Reference node loop; the compiled ``kernels.search`` mirrors it."""
        cfg = self.cfg
        trace = cfg.trace
        pool = cfg.callback_pool if cfg.callback_pool is not None and len(cfg.callback_pool) else None
        root = self._make_node(np.full(self.model.n, FREE, dtype=np.int8), 0, -math.inf)
        frontier: list = [(self._key(root), root)]
        nodes = 0
        status = Status.OPTIMAL
        while frontier:
            if time.perf_counter() >= deadline:
                status = Status.TIME_LIMIT
                break
            if cfg.node_limit is not None and nodes >= cfg.node_limit:
                status = Status.NODE_LIMIT
                break
            _, node = heapq.heappop(frontier)
            if node.lower_bound >= self.incumbent_value:
                if trace:
                    trace("fathom", node, self.incumbent_value)
                continue
            nodes += 1

            if pool is not None:
                fixed = node.states != FREE
                match = np.flatnonzero(np.all(pool.bits[:, fixed] == node.states[fixed], axis=1))
                if len(match):
                    k = match[0]
                    if self._accept(pool.bits[k], float(pool.values[k])):
                        self.stats.callback_accepted += 1
                    else:
                        self.stats.callback_rejected += 1

            if node.free_edges == 0:
                self._accept(*self._complete(node))
                if trace:
                    trace("leaf", node, self.incumbent_value)
                continue

            if trace:
                trace("expand", node, self.incumbent_value)
            v = select_branch_var(node.states, self._order)
            for value in (0, 1):
                states = node.states.copy()
                states[v] = value
                child = self._make_node(states, node.depth + 1, node.lower_bound)
                if child.lower_bound < self.incumbent_value:
                    heapq.heappush(frontier, (self._key(child), child))
                elif trace:
                    trace("fathom", child, self.incumbent_value)
        return status, nodes, root.lower_bound

    def _search_compiled(self, deadline: float) -> tuple[Status, int, float]:
        cfg = self.cfg
        indptr, indices, weights = self._csr
        pool = cfg.callback_pool
        out = kernels.search(
            self.model.linear, indptr, indices, weights, self.model.offset,
            self._order.astype(np.int64), _SELECTION_CODE[cfg.node_selection],
            self.incumbent_value, self.incumbent,
            None if pool is None else pool.bits, None if pool is None else pool.values,
            -1 if cfg.node_limit is None else cfg.node_limit, deadline,
        )
        if out["incumbent"] is not None and out["incumbent_value"] < self.incumbent_value:
            self.incumbent_value = out["incumbent_value"]
            self.incumbent = out["incumbent"]
        self.stats.callback_accepted += out["callback_accepted"]
        self.stats.callback_rejected += out["callback_rejected"]
        return _STATUS_CODE[out["status"]], out["nodes"], out["root_bound"]

    def use_compiled(self) -> bool:
        return kernels.HAS_SEARCH and self.cfg.trace is None and not self.cfg.check_invariants

    def run(self) -> SolveResult:
        cfg = self.cfg
        start = time.perf_counter()
        deadline = start + cfg.time_limit
        n = self.model.n

        if cfg.mip_start is not None:
            for bits, _ in cfg.mip_start:
                self.offer_incumbent(bits, "mip_start")
        if cfg.root_heuristic and n > 0:
            self.offer_incumbent(round_and_repair(self.model, np.full(n, 0.5)))

        search = self._search_compiled if self.use_compiled() else self._search_py
        status, nodes, root_bound = search(deadline)
        self.stats.accepted += self.stats.callback_accepted
        self.stats.rejected += self.stats.callback_rejected

        if self.incumbent is None:
            # reachable only when the limit hits before the root is processed
            self.offer_incumbent(np.zeros(n, dtype=np.uint8))
        return SolveResult(
            status=status,
            best_value=evaluate(self.model, self.incumbent),
            best_assignment=self.incumbent,
            nodes_explored=nodes,
            wall_time=time.perf_counter() - start,
            injection_stats=self.stats,
            root_bound=root_bound,
        )


_SELECTION_CODE = {NodeSelection.BEST_BOUND: 0, NodeSelection.DEPTH_FIRST: 1, NodeSelection.BREADTH_FIRST: 2}
_STATUS_CODE = {0: Status.OPTIMAL, 1: Status.TIME_LIMIT, 2: Status.NODE_LIMIT}


def solve(model: QuboModel, cfg: SolverConfig | None = None) -> SolveResult:
    return Solver(model, cfg).run()
