"""Instance generators and the sparse triplet file format.

Triplet format (UTF-8 text)::

    # optional comments
    n nnz
    i j coef        (nnz lines, 0-based, i <= j)
    offset c        (optional trailer)

A ``# planted <bits>`` comment, when present, records a known optimal
assignment; it is written by the XORSAT generator and read by
:func:`read_planted`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .model import QuboModel

__all__ = [
    "PlantedInstance",
    "FormatError",
    "gen_xorsat",
    "xorsat_penalty",
    "gen_random",
    "save_model",
    "load_model",
    "read_planted",
    "dumps_model",
    "loads_model",
]

_MAX_PAIRING_TRIES = 2000
_MAX_RESEEDS = 50


class FormatError(ValueError):
    """Malformed triplet file; ``lineno`` is 1-based (0 when not line specific)."""

    def __init__(self, message: str, lineno: int = 0, path: str | None = None):
        where = f"{path or '<string>'}:{lineno}: " if lineno else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.lineno = lineno
        self.path = path


@dataclass(frozen=True)
class PlantedInstance:
    model: QuboModel
    planted: np.ndarray
    k: int
    r: int
    n_core: int
    seed: int
    clauses: tuple[tuple[int, ...], ...] = field(repr=False, default=())
    parities: tuple[int, ...] = field(repr=False, default=())


def _aux_count(k: int) -> int:
    # sums of k bits with a given parity span (k + 1) // 2 even offsets,
    # covered by 2 * (w_1 + ... + w_a) for a = k // 2 auxiliaries
    return k // 2


def xorsat_penalty(clause, parity: int, aux) -> tuple[dict[tuple[int, int], float], float]:
    """Expand ``(sum x_clause - parity - 2 * sum w_aux)**2`` into QUBO terms.

    Returns ``(terms, constant)``.  The square is zero exactly when the
    clause parity holds and the auxiliaries encode ``(sum - parity) / 2``.
    """
    coefs = [(v, 1) for v in clause] + [(w, -2) for w in aux]
    c = -parity
    terms: dict[tuple[int, int], float] = {}
    for v, a in coefs:
        # a^2 x^2 = a^2 x; cross term with the constant contributes 2ac x
        terms[(v, v)] = terms.get((v, v), 0) + a * a + 2 * a * c
    for (u, a), (v, b) in combinations(coefs, 2):
        key = (u, v) if u < v else (v, u)
        terms[key] = terms.get(key, 0) + 2 * a * b
    return terms, c * c


def _pair_clauses(n_core: int, k: int, r: int, rng: np.random.Generator):
    stubs = np.repeat(np.arange(n_core), r)
    for _ in range(_MAX_PAIRING_TRIES):
        perm = rng.permutation(stubs).reshape(-1, k)
        if any(len(set(row)) != k for row in perm.tolist()):
            continue
        clauses = [tuple(sorted(row)) for row in perm.tolist()]
        if len(set(clauses)) != len(clauses):
            continue
        return sorted(clauses)
    return None


def gen_xorsat(n_core: int, k: int = 3, r: int = 3, seed: int = 0) -> PlantedInstance:
    """Planted ``r``-regular ``k``-XORSAT instance encoded as a QUBO.

    Core variables take indices ``0 .. n_core - 1``; each clause appends
    ``k // 2`` auxiliary variables after them.  The planted assignment has
    objective 0, which is the global minimum since the objective is a sum of
    squares.
    """
    if k not in (3, 5):
        raise ValueError(f"k must be 3 or 5, got {k}")
    if r < 1 or n_core < k or (n_core * r) % k:
        raise ValueError(f"need n_core >= k and n_core * r divisible by k (n_core={n_core}, k={k}, r={r})")
    ss = np.random.SeedSequence(seed)
    clauses = None
    for attempt in range(_MAX_RESEEDS):
        rng = np.random.default_rng(ss.spawn(1)[0] if attempt else ss)
        clauses = _pair_clauses(n_core, k, r, rng)
        if clauses is not None:
            break
    if clauses is None:
        raise ValueError(f"could not build a simple {r}-regular {k}-uniform configuration on {n_core} variables")
    x_core = rng.integers(0, 2, size=n_core)
    n_aux = _aux_count(k)
    m = len(clauses)
    n = n_core + m * n_aux
    planted = np.zeros(n, dtype=np.uint8)
    planted[:n_core] = x_core
    terms: dict[tuple[int, int], float] = {}
    offset = 0
    parities = []
    for c, clause in enumerate(clauses):
        s = int(x_core[list(clause)].sum())
        parity = s % 2
        parities.append(parity)
        aux = [n_core + c * n_aux + a for a in range(n_aux)]
        half = (s - parity) // 2
        for a, w in enumerate(aux):
            planted[w] = 1 if half > a else 0
        t, const = xorsat_penalty(clause, parity, aux)
        for key, v in t.items():
            terms[key] = terms.get(key, 0) + v
        offset += const
    model = QuboModel(n, terms, offset)
    return PlantedInstance(model, planted, k, r, n_core, seed, tuple(clauses), tuple(parities))


def gen_random(n: int, density: float = 0.5, coef_range: int = 10, seed: int = 0) -> QuboModel:
    """Random integer QUBO: each pair and each diagonal entry is present with
    probability ``density`` and draws a nonzero integer in
    ``[-coef_range, coef_range]``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    if coef_range < 1:
        raise ValueError("coef_range must be at least 1")
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n)
    present = rng.random(len(rows)) < density
    mags = rng.integers(1, coef_range + 1, size=len(rows))
    signs = rng.choice(np.array([-1, 1]), size=len(rows))
    coefs = mags * signs
    terms = {(int(i), int(j)): float(c) for i, j, c, p in zip(rows, cols, coefs, present) if p}
    return QuboModel(n, terms)


def _fmt(c: float) -> str:
    if c.is_integer() and abs(c) < 2**53:
        return str(int(c))
    return repr(c)


def dumps_model(model: QuboModel, comments=()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"{model.n} {model.num_terms}")
    lines.extend(f"{i} {j} {_fmt(c)}" for (i, j), c in model.terms.items())
    if model.offset != 0.0:
        lines.append(f"offset {_fmt(model.offset)}")
    return "\n".join(lines) + "\n"


def save_model(model: QuboModel, path, comments=(), planted=None) -> None:
    comments = list(comments)
    if planted is not None:
        comments.append("planted " + "".join(str(int(b)) for b in planted))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model, comments))


def _parse_float(text: str, lineno: int, path) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"invalid number {text!r}", lineno, path) from None
    if not math.isfinite(v):
        raise FormatError(f"non-finite coefficient {text!r}", lineno, path)
    return v


def _parse_int(text: str, lineno: int, path) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"invalid integer {text!r}", lineno, path) from None


def loads_model(text: str, path=None) -> QuboModel:
    header = None
    terms: dict[tuple[int, int], float] = {}
    offset = 0.0
    count = 0
    seen_offset = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise FormatError("header must be 'n nnz'", lineno, path)
            n, nnz = (_parse_int(p, lineno, path) for p in parts)
            if n < 1 or nnz < 0:
                raise FormatError("header needs n >= 1 and nnz >= 0", lineno, path)
            header = (n, nnz)
            continue
        if parts[0] == "offset":
            if len(parts) != 2 or seen_offset:
                raise FormatError("offset trailer must appear once as 'offset <real>'", lineno, path)
            offset = _parse_float(parts[1], lineno, path)
            seen_offset = True
            continue
        if seen_offset:
            raise FormatError("term line after offset trailer", lineno, path)
        if len(parts) != 3:
            raise FormatError("term line must be 'i j coef'", lineno, path)
        i, j = _parse_int(parts[0], lineno, path), _parse_int(parts[1], lineno, path)
        c = _parse_float(parts[2], lineno, path)
        n = header[0]
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(f"index ({i}, {j}) out of range for n={n}", lineno, path)
        if i > j:
            raise FormatError(f"term ({i}, {j}) must have i <= j", lineno, path)
        if (i, j) in terms:
            raise FormatError(f"duplicate term ({i}, {j})", lineno, path)
        terms[(i, j)] = c
        count += 1
    if header is None:
        raise FormatError("missing 'n nnz' header", 0, path)
    if count != header[1]:
        raise FormatError(f"header declares {header[1]} terms, found {count}", 0, path)
    return QuboModel(header[0], terms, offset)


def load_model(path) -> QuboModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read(), os.fspath(path))


def read_planted(path) -> np.ndarray | None:
    """The ``# planted <bits>`` comment of a triplet file, if any."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s.startswith("#"):
                body = s[1:].split()
                if len(body) == 2 and body[0] == "planted":
                    return np.frombuffer(body[1].encode(), dtype=np.uint8) - ord("0")
            elif s:
                break
    return None
