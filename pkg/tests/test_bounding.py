import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import all_assignments, brute_force, energies
from qbb.bounding import flip_delta, one_flip_descent, round_and_repair, termwise_lower_bound
from qbb.instances import gen_random
from qbb.model import FREE, PartialAssignment, QuboModel, evaluate, fix_variables


def test_termwise_bound_eq3(eq3):
    b = termwise_lower_bound(eq3)
    assert b.lower_bound == -14  # -2 - 8 - 4
    assert not b.is_exact


def test_separable_bound_is_exact():
    m = QuboModel(3, {(0, 0): -2, (1, 1): 3, (2, 2): -1}, offset=1.5)
    b = termwise_lower_bound(m)
    assert b.is_exact
    assert b.lower_bound == brute_force(m)[0] == -1.5


def test_bound_on_empty_model():
    b = termwise_lower_bound(QuboModel(0, offset=4.0))
    assert (b.lower_bound, b.is_exact) == (4.0, True)


@pytest.mark.parametrize("seed", range(40))
def test_bound_valid_and_monotone_under_single_fixing(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    m = gen_random(n, density=float(rng.uniform(0.2, 1.0)), coef_range=8, seed=seed)
    parent = PartialAssignment(rng.choice([FREE, FREE, 0, 1], size=n).astype(np.int8))
    free = parent.free_indices
    if len(free) == 0:
        return
    reduced, _ = fix_variables(m, parent)
    pb = termwise_lower_bound(reduced).lower_bound
    assert pb <= brute_force(reduced)[0]
    v = int(rng.choice(free))
    for value in (0, 1):
        child, _ = fix_variables(m, parent.fix(v, value))
        assert termwise_lower_bound(child).lower_bound >= pb


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 10))
def test_flip_delta_matches_reevaluation(seed, n):
    m = gen_random(n, density=0.6, coef_range=9, seed=seed)
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, n).astype(np.uint8)
    i = int(rng.integers(n))
    y = x.copy()
    y[i] ^= 1
    assert abs(flip_delta(m, x, i) - (evaluate(m, y) - evaluate(m, x))) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 10))
def test_descent_sound_and_locally_optimal(seed, n):
    m = gen_random(n, density=0.6, coef_range=9, seed=seed)
    x = np.random.default_rng(seed).integers(0, 2, n).astype(np.uint8)
    y = one_flip_descent(m, x)
    assert evaluate(m, y) <= evaluate(m, x)
    assert all(flip_delta(m, y, i) >= -1e-12 for i in range(n))


def test_descent_ties_go_to_lowest_index():
    # flipping either bit improves by exactly 1; bit 0 is flipped first, after
    # which bit 1 no longer improves
    m = QuboModel(2, {(0, 0): -1, (1, 1): -1, (0, 1): 2})
    assert one_flip_descent(m, [0, 0]).tolist() == [1, 0]


def test_round_and_repair(eq3):
    x = round_and_repair(eq3, [0.9, 0.1, 0.2, 0.7])
    assert x.tolist() == [1, 0, 0, 1]
    with pytest.raises(ValueError):
        round_and_repair(eq3, [0.5, 0.5])


def test_bound_never_exceeds_any_completion():
    m = gen_random(9, density=0.8, coef_range=5, seed=11)
    e = energies(m, all_assignments(m.n))
    assert termwise_lower_bound(m).lower_bound <= e.min()
