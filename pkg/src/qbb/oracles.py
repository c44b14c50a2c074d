"""Heuristic Ising oracles and solution pools.

Built-in samplers (simulated annealing, tabu search, greedy construction)
and a one-shot subprocess oracle speaking a line-delimited JSON protocol.
Every sampler returns a :class:`SolutionPool` whose objective values are
recomputed locally, whatever the sampler reported.
"""

from __future__ import annotations

import enum
import json
import logging
import shlex
import subprocess
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .bounding import one_flip_descent
from .model import FREE, PartialAssignment, QuboModel, evaluate

log = logging.getLogger(__name__)

__all__ = [
    "OracleKind",
    "OracleConfig",
    "SolutionPool",
    "OracleError",
    "CapacityExceeded",
    "ProtocolError",
    "OracleTimeout",
    "simulated_annealing",
    "tabu_search",
    "greedy_construct",
    "external_oracle",
    "run_oracle",
    "top_k",
    "filter_compatible",
    "encode_request",
]

# order/uniform draws are generated in blocks of at most this many entries
_DRAW_BLOCK = 1 << 22


class OracleError(RuntimeError):
    pass


class CapacityExceeded(OracleError):
    """The model has more variables than the oracle accepts."""


class ProtocolError(OracleError):
    pass


class OracleTimeout(OracleError):
    pass


class OracleKind(str, enum.Enum):
    SIMULATED_ANNEALING = "sa"
    TABU_SEARCH = "tabu"
    GREEDY = "greedy"
    EXTERNAL = "external"


@dataclass(frozen=True)
class OracleConfig:
    kind: OracleKind = OracleKind.SIMULATED_ANNEALING
    seed: int = 0
    budget: int = 100
    num_reads: int = 10
    capacity: int | None = None
    external_cmd: str | Sequence[str] | None = None
    timeout: float | None = 60.0
    # SA schedule; initial temperature defaults to the largest |coefficient|
    t_initial: float | None = None
    t_final_ratio: float = 1e-3
    # tabu tenure; defaults to 10 + n // 10, capped at n - 1
    tenure: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", OracleKind(self.kind))
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.num_reads <= 0:
            raise ValueError("num_reads must be positive")
        if self.capacity is not None and self.capacity <= 0:
            raise ValueError("capacity must be positive when set")
        if self.kind is OracleKind.EXTERNAL and not self.external_cmd:
            raise ValueError("external oracle needs external_cmd")
        if not 0.0 < self.t_final_ratio <= 1.0:
            raise ValueError("t_final_ratio must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str, **kwargs) -> "OracleConfig":
        """Parse ``sa``, ``tabu``, ``greedy`` or ``external:<command line>``."""
        name, _, rest = text.partition(":")
        kind = OracleKind(name.strip().lower())
        if kind is OracleKind.EXTERNAL:
            if not rest.strip():
                raise ValueError("external oracle needs a command: external:<cmd>")
            kwargs["external_cmd"] = rest.strip()
        elif rest:
            raise ValueError(f"unexpected argument for oracle {name!r}")
        return cls(kind=kind, **kwargs)

    def with_seed(self, seed: int) -> "OracleConfig":
        return replace(self, seed=seed)


class SolutionPool:
    """Assignments sorted by objective (ties by bit pattern), deduplicated."""

    def __init__(self, bits: np.ndarray, values: np.ndarray):
        self._bits = bits
        self._values = values
        bits.setflags(write=False)
        values.setflags(write=False)

    @classmethod
    def from_samples(cls, model: QuboModel, samples) -> "SolutionPool":
        if model.n == 0:
            has_any = len(samples) > 0
            return cls(np.zeros((int(has_any), 0), dtype=np.uint8), np.full(int(has_any), model.offset))
        arr = np.asarray(samples, dtype=np.uint8).reshape(-1, model.n)
        if len(arr) == 0:
            return cls.empty(model.n)
        if np.any(arr > 1):
            raise ValueError("samples must be binary")
        uniq = np.unique(arr, axis=0)
        values = np.array([evaluate(model, row) for row in uniq])
        keys = [uniq[:, c] for c in range(model.n - 1, -1, -1)] + [values]
        order = np.lexsort(keys)
        return cls(np.ascontiguousarray(uniq[order]), values[order])

    @classmethod
    def empty(cls, n: int) -> "SolutionPool":
        return cls(np.zeros((0, n), dtype=np.uint8), np.zeros(0))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._bits.shape[1]

    def __len__(self):
        return len(self._values)

    def __iter__(self) -> Iterator[tuple[np.ndarray, float]]:
        for row, v in zip(self._bits, self._values):
            yield row, float(v)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return SolutionPool(self._bits[idx].copy(), self._values[idx].copy())
        return self._bits[idx], float(self._values[idx])

    @property
    def best(self) -> tuple[np.ndarray, float] | None:
        return self[0] if len(self) else None

    def merge(self, model: QuboModel, other: "SolutionPool") -> "SolutionPool":
        return SolutionPool.from_samples(model, np.vstack([self._bits, other._bits]))

    def to_bytes(self) -> bytes:
        return self._bits.tobytes() + self._values.tobytes()

    def __eq__(self, other):
        if not isinstance(other, SolutionPool):
            return NotImplemented
        return self._bits.shape == other._bits.shape and self.to_bytes() == other.to_bytes()

    def __repr__(self):
        best = f", best={self._values[0]!r}" if len(self) else ""
        return f"SolutionPool(size={len(self)}{best})"


def top_k(pool: SolutionPool, k: int) -> SolutionPool:
    if k < 1:
        raise ValueError("k must be at least 1")
    return pool[:k]


def filter_compatible(pool: SolutionPool, pa) -> SolutionPool:
    """Entries agreeing with every fixed position of ``pa``; order is kept."""
    states = pa.states if isinstance(pa, PartialAssignment) else np.asarray(pa, dtype=np.int8)
    if len(states) != pool.n:
        raise ValueError(f"partial assignment length {len(states)} does not match pool width {pool.n}")
    fixed = states != FREE
    keep = np.all(pool.bits[:, fixed] == states[fixed], axis=1)
    return SolutionPool(pool.bits[keep], pool.values[keep])


def _gate(model: QuboModel, cfg: OracleConfig, kind: OracleKind | None = None):
    if kind is not None and cfg.kind is not kind:
        raise ValueError(f"expected an oracle config of kind {kind.value!r}, got {cfg.kind.value!r}")
    if cfg.capacity is not None and model.n > cfg.capacity:
        raise CapacityExceeded(f"model has {model.n} variables, oracle capacity is {cfg.capacity}")


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _max_abs_coef(model: QuboModel) -> float:
    return max((abs(c) for c in model.terms.values()), default=0.0)


def anneal_schedule(model: QuboModel, cfg: OracleConfig) -> np.ndarray:
    """Geometric temperatures from T0 down to ``t_final_ratio * T0``."""
    t0 = cfg.t_initial if cfg.t_initial is not None else _max_abs_coef(model)
    if t0 <= 0.0:
        t0 = 1.0
    if cfg.budget == 1:
        return np.array([t0])
    return np.geomspace(t0, t0 * cfg.t_final_ratio, cfg.budget)


def simulated_annealing(model: QuboModel, cfg: OracleConfig) -> SolutionPool:
    """Independent annealing chains; the pool holds each chain's best state.

    One sweep proposes every bit flip once in random order.  Improving flips
    are always accepted, worsening ones with probability ``exp(-delta / T)``.
    """
    _gate(model, cfg, OracleKind.SIMULATED_ANNEALING)
    n = model.n
    if n == 0:
        return SolutionPool.from_samples(model, np.zeros((1, 0), dtype=np.uint8))
    init_rng, order_rng, accept_rng = _streams(cfg.seed, 3)
    temps = anneal_schedule(model, cfg)
    x0 = init_rng.integers(0, 2, size=(cfg.num_reads, n), dtype=np.uint8)
    indptr, indices, weights = model.csr
    per_read = cfg.budget * n
    chunk = max(1, _DRAW_BLOCK // per_read)
    base = np.arange(n, dtype=np.int32)
    results = []
    for start in range(0, cfg.num_reads, chunk):
        stop = min(cfg.num_reads, start + chunk)
        reads = stop - start
        order = order_rng.permuted(np.tile(base, (reads * cfg.budget, 1)), axis=1)
        uniforms = accept_rng.random((reads, cfg.budget, n))
        results.append(kernels.anneal(model.linear, indptr, indices, weights, x0[start:stop],
                                      order.reshape(reads, cfg.budget, n), uniforms, temps))
    return SolutionPool.from_samples(model, np.vstack(results))


def default_tenure(n: int) -> int:
    return max(0, min(10 + n // 10, n - 1))


def tabu_search(model: QuboModel, cfg: OracleConfig) -> SolutionPool:
    """Best admissible single flip per iteration, even when it worsens.

    A variable stays tabu for ``tenure`` iterations after being flipped,
    unless the move would beat the best value seen in the current read.
    """
    _gate(model, cfg, OracleKind.TABU_SEARCH)
    n = model.n
    if n == 0:
        return SolutionPool.from_samples(model, np.zeros((1, 0), dtype=np.uint8))
    (init_rng,) = _streams(cfg.seed, 1)
    x0 = init_rng.integers(0, 2, size=(cfg.num_reads, n), dtype=np.uint8)
    tenure = default_tenure(n) if cfg.tenure is None else min(cfg.tenure, max(n - 1, 0))
    indptr, indices, weights = model.csr
    best = kernels.tabu(model.linear, indptr, indices, weights, x0, cfg.budget, tenure)
    return SolutionPool.from_samples(model, best)


def greedy_construct(model: QuboModel, cfg: OracleConfig) -> SolutionPool:
    """Switch on the most negative marginal gain until none is negative.

    The first read breaks ties by index, later reads by a random ranking.
    Every construction is finished with one-flip descent.  ``budget`` is not
    used: a construction stops by itself after at most ``n`` steps.
    """
    _gate(model, cfg, OracleKind.GREEDY)
    n = model.n
    if n == 0:
        return SolutionPool.from_samples(model, np.zeros((1, 0), dtype=np.uint8))
    (rng,) = _streams(cfg.seed, 1)
    indptr, indices, weights = model.csr
    samples = []
    for r in range(cfg.num_reads):
        rank = np.arange(n) if r == 0 else rng.permutation(n)
        gains = model.linear.copy()
        x = np.zeros(n, dtype=np.uint8)
        while True:
            cand = np.flatnonzero((x == 0) & (gains < -1e-12))
            if len(cand) == 0:
                break
            g = gains[cand]
            tied = cand[g == g.min()]
            v = tied[np.argmin(rank[tied])]
            x[v] = 1
            nbr = slice(indptr[v], indptr[v + 1])
            gains[indices[nbr]] += weights[nbr]
        samples.append(one_flip_descent(model, x))
    return SolutionPool.from_samples(model, np.array(samples))


def encode_request(model: QuboModel, num_reads: int, seed: int) -> str:
    payload = {
        "n": model.n,
        "terms": [[i, j, c] for (i, j), c in model.terms.items()],
        "offset": model.offset,
        "num_reads": num_reads,
        "seed": seed,
    }
    return json.dumps(payload, separators=(",", ":"))


def _decode_response(line: str, n: int) -> np.ndarray:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"unparsable oracle response: {exc}") from None
    samples = payload.get("samples") if isinstance(payload, dict) else None
    if not isinstance(samples, list):
        raise ProtocolError("oracle response lacks a 'samples' list")
    rows = []
    for k, s in enumerate(samples):
        bits = s.get("bits") if isinstance(s, dict) else None
        if not isinstance(bits, str) or len(bits) != n or set(bits) - {"0", "1"}:
            raise ProtocolError(f"sample {k}: 'bits' must be a {n}-character 0/1 string")
        energy = s.get("energy")
        if energy is not None and not isinstance(energy, (int, float)):
            raise ProtocolError(f"sample {k}: 'energy' must be numeric")
        rows.append(np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"))
    return np.array(rows, dtype=np.uint8).reshape(-1, n)


def external_oracle(model: QuboModel, cfg: OracleConfig) -> SolutionPool:
    """Run ``cfg.external_cmd`` once: one request line in, one response line out.

    Reported energies are ignored; objectives are recomputed here.
    """
    _gate(model, cfg, OracleKind.EXTERNAL)
    argv = shlex.split(cfg.external_cmd) if isinstance(cfg.external_cmd, str) else list(cfg.external_cmd)
    request = encode_request(model, cfg.num_reads, cfg.seed) + "\n"
    try:
        proc = subprocess.run(argv, input=request, capture_output=True, text=True, timeout=cfg.timeout)
    except subprocess.TimeoutExpired:
        raise OracleTimeout(f"oracle {argv[0]!r} exceeded {cfg.timeout} s") from None
    except OSError as exc:
        raise ProtocolError(f"cannot launch oracle {argv[0]!r}: {exc}") from None
    if proc.returncode != 0:
        raise ProtocolError(f"oracle exited with status {proc.returncode}: {proc.stderr.strip()[:200]}")
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines:
        raise ProtocolError("oracle produced no response line")
    if len(lines) > 1:
        log.warning("oracle wrote %d lines; using the first", len(lines))
    return SolutionPool.from_samples(model, _decode_response(lines[0], model.n))


_DISPATCH = {
    OracleKind.SIMULATED_ANNEALING: simulated_annealing,
    OracleKind.TABU_SEARCH: tabu_search,
    OracleKind.GREEDY: greedy_construct,
    OracleKind.EXTERNAL: external_oracle,
}


def run_oracle(model: QuboModel, cfg: OracleConfig) -> SolutionPool:
    return _DISPATCH[cfg.kind](model, cfg)
