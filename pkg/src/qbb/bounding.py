"""Lower bounds and primal helpers for (sub)problems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import QuboModel, as_assignment

__all__ = ["BoundResult", "termwise_lower_bound", "one_flip_descent", "round_and_repair", "flip_delta"]


@dataclass(frozen=True)
class BoundResult:
    lower_bound: float
    is_exact: bool


def termwise_lower_bound(model: QuboModel) -> BoundResult:
    """``offset + sum(min(0, q))`` over every stored coefficient.

    Each term contributes either 0 or its coefficient, so this never
    exceeds the optimum.  It is attained when no bilinear terms remain.
    """
    negatives = [c for c in model.terms.values() if c < 0.0]
    return BoundResult(math.fsum([model.offset, *negatives]), model.num_interactions == 0)


def flip_delta(model: QuboModel, x, i: int) -> float:
    """Objective change from flipping bit ``i``, from incident terms only."""
    bits = as_assignment(model, x)
    indptr, indices, weights = model.csr
    nbr = slice(indptr[i], indptr[i + 1])
    field = model.linear[i] + float(np.dot(weights[nbr], bits[indices[nbr]]))
    return -field if bits[i] else field


def one_flip_descent(model: QuboModel, x) -> np.ndarray:
    """Apply the best strictly improving single flip until none is left.

    Ties go to the lowest index; a flip must improve by more than 1e-12.
    """
    bits = as_assignment(model, x)
    if model.n == 0:
        return bits
    indptr, indices, weights = model.csr
    return kernels.descend(model.linear, indptr, indices, weights, bits)


def round_and_repair(model: QuboModel, hint) -> np.ndarray:
    """Threshold a fractional hint at 0.5 and polish with :func:`one_flip_descent`."""
    h = np.asarray(hint, dtype=float)
    if h.shape != (model.n,):
        raise ValueError(f"hint length {h.shape} does not match n={model.n}")
    return one_flip_descent(model, (h >= 0.5).astype(np.uint8))
