"""QUBO data model: sparse coefficients, evaluation, interaction graph and
variable fixing.

A model stores each unordered pair once.  Because ``x_i * x_j == x_j * x_i``
for binary variables, the symmetric entries ``Q[i, j] + Q[j, i]`` of a dense
matrix are folded into a single coefficient keyed by ``(i, j)`` with
``i < j``.  Diagonal entries ``(i, i)`` are the linear coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

FREE = -1

__all__ = [
    "FREE",
    "QuboModel",
    "PartialAssignment",
    "InteractionGraph",
    "IsingModel",
    "as_assignment",
    "evaluate",
    "interaction_graph",
    "branch_priority",
    "fix_variables",
    "expand_assignment",
    "to_ising",
    "from_ising",
    "ising_energy",
]


class QuboModel:
    """Immutable sparse QUBO ``offset + sum_{i<=j} q_ij x_i x_j``.

    ``terms`` may contain both ``(i, j)`` and ``(j, i)``; they are summed.
    Zero coefficients are dropped so the stored form is canonical.
    """

    def __init__(self, n: int, terms: Mapping[tuple[int, int], float] | Iterable = (), offset: float = 0.0):
        n = int(n)
        if n < 0:
            raise ValueError(f"variable count must be non-negative, got {n}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple[int, int], float] = {}
        for key, coef in items:
            i, j = int(key[0]), int(key[1])
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"term index ({i}, {j}) out of range for n={n}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient for ({i}, {j})")
            if i > j:
                i, j = j, i
            acc[(i, j)] = acc.get((i, j), 0.0) + coef
        offset = float(offset)
        if not math.isfinite(offset):
            raise ValueError("non-finite offset")
        self._n = n
        self._terms = MappingProxyType({k: acc[k] for k in sorted(acc) if acc[k] != 0.0})
        self._offset = offset

    @classmethod
    def from_dense(cls, matrix, offset: float = 0.0) -> "QuboModel":
        """Build from a dense square matrix; ``Q[i, j]`` and ``Q[j, i]`` are folded."""
        q = np.asarray(matrix, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("matrix must be square")
        rows, cols = np.nonzero(q)
        return cls(q.shape[0], (((int(i), int(j)), q[i, j]) for i, j in zip(rows, cols)), offset)

    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> Mapping[tuple[int, int], float]:
        return self._terms

    @property
    def offset(self) -> float:
        return self._offset

    @property
    def num_terms(self) -> int:
        return len(self._terms)

    @property
    def num_interactions(self) -> int:
        return self._term_arrays[3]

    def with_offset(self, offset: float) -> "QuboModel":
        return QuboModel(self._n, self._terms, offset)

    def to_dense(self) -> np.ndarray:
        """Upper-triangular dense matrix (folded coefficients above the diagonal)."""
        q = np.zeros((self._n, self._n))
        for (i, j), c in self._terms.items():
            q[i, j] = c
        return q

    def __eq__(self, other):
        if not isinstance(other, QuboModel):
            return NotImplemented
        return self._n == other._n and self._offset == other._offset and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self._n, self._offset, tuple(self._terms.items())))

    def __reduce__(self):
        return (QuboModel, (self._n, dict(self._terms), self._offset))

    def relabel(self, perm) -> "QuboModel":
        """Model with variable ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (self._n,) or not np.array_equal(np.sort(perm), np.arange(self._n)):
            raise ValueError("perm must be a permutation of range(n)")
        return QuboModel(self._n, {(int(perm[i]), int(perm[j])): c for (i, j), c in self._terms.items()},
                         self._offset)

    def __repr__(self):
        return f"QuboModel(n={self._n}, terms={self.num_terms}, offset={self._offset!r})"

    @cached_property
    def _term_arrays(self):
        k = len(self._terms)
        rows = np.empty(k, dtype=np.int64)
        cols = np.empty(k, dtype=np.int64)
        vals = np.empty(k, dtype=np.float64)
        for t, ((i, j), c) in enumerate(self._terms.items()):
            rows[t], cols[t], vals[t] = i, j, c
        return rows, cols, vals, int(np.count_nonzero(rows != cols))

    @cached_property
    def linear(self) -> np.ndarray:
        """Diagonal coefficients as a dense vector."""
        lin = np.zeros(self._n)
        rows, cols, vals, _ = self._term_arrays
        diag = rows == cols
        lin[rows[diag]] = vals[diag]
        lin.setflags(write=False)
        return lin

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency of the bilinear terms as ``(indptr, indices, weights)``.

        Each pair appears in both rows; neighbours are sorted ascending.
        """
        rows, cols, vals, _ = self._term_arrays
        off = rows != cols
        r = np.concatenate([rows[off], cols[off]])
        c = np.concatenate([cols[off], rows[off]])
        w = np.concatenate([vals[off], vals[off]])
        order = np.lexsort((c, r))
        r, c, w = r[order], c[order], w[order]
        indptr = np.zeros(self._n + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=self._n), out=indptr[1:])
        indices = c.astype(np.int32)
        for a in (indptr, indices, w):
            a.setflags(write=False)
        return indptr, indices, w


class PartialAssignment:
    """Per-variable state: ``FREE`` (-1), 0 or 1.  Immutable."""

    __slots__ = ("_states",)

    def __init__(self, states):
        arr = np.array(states, dtype=np.int8)
        if arr.ndim != 1 or np.any((arr < FREE) | (arr > 1)):
            raise ValueError("states must be a 1-d vector over {-1, 0, 1}")
        arr.setflags(write=False)
        self._states = arr

    @classmethod
    def free(cls, n: int) -> "PartialAssignment":
        return cls(np.full(n, FREE, dtype=np.int8))

    @classmethod
    def from_fixings(cls, n: int, fixings: Mapping[int, int]) -> "PartialAssignment":
        states = np.full(n, FREE, dtype=np.int8)
        for i, v in fixings.items():
            if v not in (0, 1):
                raise ValueError(f"fixing for {i} must be 0 or 1")
            states[i] = v
        return cls(states)

    @property
    def states(self) -> np.ndarray:
        return self._states

    def __len__(self):
        return len(self._states)

    @property
    def free_indices(self) -> np.ndarray:
        return np.flatnonzero(self._states == FREE)

    @property
    def num_fixed(self) -> int:
        return int(np.count_nonzero(self._states != FREE))

    def fix(self, i: int, value: int) -> "PartialAssignment":
        states = self._states.copy()
        states[i] = value
        return PartialAssignment(states)

    def is_complete(self) -> bool:
        return not np.any(self._states == FREE)

    def to_assignment(self) -> np.ndarray:
        if not self.is_complete():
            raise ValueError("partial assignment still has free variables")
        return self._states.astype(np.uint8)

    def __eq__(self, other):
        return isinstance(other, PartialAssignment) and np.array_equal(self._states, other._states)

    def __hash__(self):
        return hash(self._states.tobytes())

    def __repr__(self):
        s = "".join("*" if v == FREE else str(v) for v in self._states)
        return f"PartialAssignment('{s}')"


@dataclass(frozen=True)
class InteractionGraph:
    adjacency: tuple[frozenset[int], ...]
    degrees: tuple[int, ...]

    @property
    def num_edges(self) -> int:
        return sum(self.degrees) // 2


@dataclass(frozen=True)
class IsingModel:
    """``sum_i h_i s_i + sum_{i<j} J_ij s_i s_j + offset`` over spins in {-1, +1}."""

    h: np.ndarray
    J: Mapping[tuple[int, int], float]
    offset: float

    @property
    def n(self) -> int:
        return len(self.h)


def as_assignment(model: QuboModel, x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.shape[0] != model.n:
        raise ValueError(f"assignment length {arr.shape[0] if arr.ndim == 1 else arr.shape} does not match n={model.n}")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return arr.astype(np.uint8)


def evaluate(model: QuboModel, x) -> float:
    """Objective value of a full binary assignment.

    Term contributions are accumulated in index-sorted order with
    ``math.fsum``, so the result is correctly rounded and reproducible.
    """
    bits = as_assignment(model, x)
    rows, cols, vals, _ = model._term_arrays
    active = (bits[rows] & bits[cols]).astype(bool)
    return math.fsum([model.offset, *vals[active].tolist()])


def interaction_graph(model: QuboModel) -> InteractionGraph:
    indptr, indices, _ = model.csr
    adjacency = tuple(frozenset(indices[indptr[i]:indptr[i + 1]].tolist()) for i in range(model.n))
    return InteractionGraph(adjacency, tuple(len(a) for a in adjacency))


def branch_priority(model: QuboModel) -> np.ndarray:
    """Degree of every variable in the interaction graph."""
    return np.diff(model.csr[0]).astype(np.int64)


def fix_variables(model: QuboModel, pa: PartialAssignment) -> tuple[QuboModel, dict[int, int]]:
    """Substitute the fixed variables of ``pa`` and re-index the free ones.

    Returns the reduced model and the ``old -> new`` index map.  Variables
    fixed to 1 push bilinear coefficients into the linear term of the free
    partner and their own linear term into the offset; variables fixed to 0
    drop their terms.
    """
    states = pa.states
    if len(states) != model.n:
        raise ValueError(f"partial assignment length {len(states)} does not match n={model.n}")
    free = np.flatnonzero(states == FREE)
    old_to_new = {int(o): k for k, o in enumerate(free)}
    offset_parts = [model.offset]
    terms: dict[tuple[int, int], float] = {}
    for (i, j), c in model.terms.items():
        si, sj = states[i], states[j]
        if si == 0 or sj == 0:
            continue
        if si == 1 and sj == 1:
            offset_parts.append(c)
        elif si == 1:
            key = (old_to_new[j], old_to_new[j])
            terms[key] = terms.get(key, 0.0) + c
        elif sj == 1:
            key = (old_to_new[i], old_to_new[i])
            terms[key] = terms.get(key, 0.0) + c
        else:
            key = (old_to_new[i], old_to_new[j])
            terms[key] = terms.get(key, 0.0) + c
    return QuboModel(len(free), terms, math.fsum(offset_parts)), old_to_new


def expand_assignment(pa: PartialAssignment, x_free) -> np.ndarray:
    """Complete ``pa`` with the values of its free variables (in index order)."""
    bits = pa.states.astype(np.int16)
    free = pa.free_indices
    x_free = np.asarray(x_free)
    if len(free) != len(x_free):
        raise ValueError("completion length does not match free variable count")
    bits[free] = x_free
    return bits.astype(np.uint8)


def to_ising(model: QuboModel) -> IsingModel:
    """Spin form via ``x_i = (1 + s_i) / 2``."""
    h = np.zeros(model.n)
    J: dict[tuple[int, int], float] = {}
    offset = model.offset
    for (i, j), c in model.terms.items():
        if i == j:
            h[i] += c / 2
            offset += c / 2
        else:
            J[(i, j)] = c / 4
            h[i] += c / 4
            h[j] += c / 4
            offset += c / 4
    return IsingModel(h, MappingProxyType(J), offset)


def from_ising(ising: IsingModel) -> QuboModel:
    """Inverse of :func:`to_ising` via ``s_i = 2 x_i - 1``."""
    terms: dict[tuple[int, int], float] = {}
    offset = ising.offset
    for i, hi in enumerate(np.asarray(ising.h, dtype=float)):
        terms[(i, i)] = terms.get((i, i), 0.0) + 2 * hi
        offset -= hi
    for (i, j), c in ising.J.items():
        terms[(i, j)] = terms.get((i, j), 0.0) + 4 * c
        terms[(i, i)] = terms.get((i, i), 0.0) - 2 * c
        terms[(j, j)] = terms.get((j, j), 0.0) - 2 * c
        offset += c
    return QuboModel(ising.n, terms, offset)


def ising_energy(ising: IsingModel, spins) -> float:
    s = np.asarray(spins, dtype=float)
    if s.shape != (ising.n,):
        raise ValueError("spin vector length mismatch")
    return ising.offset + float(np.dot(ising.h, s)) + sum(c * s[i] * s[j] for (i, j), c in ising.J.items())
