import numpy as np
import pytest

from fairmdp import (ConfigurationError, GroupFunction, GroupSet,
                     all_conjunctions, conjunction_class_argmin,
                     conjunction_separator, evaluate, lin_opt, opt_seq,
                     verify_separator)

from helpers import random_explicit_groups


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def test_conjunction_evaluation():
    g = GroupFunction.from_conjunction((0, 2))
    assert evaluate(g, np.array([1, 0, 1])) == 1
    assert evaluate(g, np.array([1, 1, 0])) == 0


def test_empty_conjunction_accepts_everything():
    g = GroupFunction.from_conjunction(())
    for x in ([0, 0], [1, 0], [1, 1]):
        assert evaluate(g, np.array(x)) == 1


def test_single_index_conjunction():
    g = GroupFunction.from_conjunction((1,))
    assert evaluate(g, np.array([1, 0, 1])) == 0
    assert evaluate(g, np.array([0, 1, 0])) == 1


def test_explicit_evaluation_by_state_index():
    g = GroupFunction.from_bits([1, 0, 1])
    assert evaluate(g, 0) == 1
    assert evaluate(g, 1) == 0
    with pytest.raises(ConfigurationError):
        evaluate(g, 5)


def test_conjunction_dimension_mismatch():
    g = GroupFunction.from_conjunction((4,))
    with pytest.raises(ConfigurationError):
        evaluate(g, np.array([1, 0]))


@pytest.mark.parametrize("seed", range(10))
def test_conjunction_matches_explicit_expansion(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 11))
    num_states = int(rng.integers(1, 12))
    features = rng.integers(0, 2, size=(num_states, d))
    idx = tuple(j for j in range(d) if rng.random() < 0.5)
    conj = GroupFunction.from_conjunction(idx)
    bits = conj.on_states(features)
    explicit = GroupFunction.from_bits(bits)
    for s in range(num_states):
        assert evaluate(conj, features[s]) == evaluate(explicit, s)


# ---------------------------------------------------------------------------
# Linear optimization oracles
# ---------------------------------------------------------------------------

def _two_singleton_groups():
    return GroupSet((GroupFunction.from_bits([1, 0]),
                     GroupFunction.from_bits([0, 1])))


def test_lin_opt_all_zero_costs_ties_to_group_zero():
    assert lin_opt(_two_singleton_groups(), np.zeros(2)) == 0


def test_lin_opt_direct_comparison():
    assert lin_opt(_two_singleton_groups(), np.array([5.0, 1.0])) == 1


@pytest.mark.parametrize("seed", range(200))
def test_lin_opt_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    num_states = int(rng.integers(1, 10))
    num_groups = int(rng.integers(1, 65))
    groups = random_explicit_groups(num_groups, num_states, rng)
    # integer costs keep both summation orders exact, so tie-breaking
    # against the brute force is well defined
    costs = rng.integers(-8, 9, size=num_states).astype(float)
    member = groups.membership()
    scores = [float(member[g] @ costs) for g in range(num_groups)]
    best = min(range(num_groups), key=lambda g: (scores[g], g))
    assert lin_opt(groups, costs) == best


def test_opt_seq_empty_sequence():
    groups = GroupSet((GroupFunction.from_conjunction((0,)),
                       GroupFunction.from_conjunction((1,))))
    assert opt_seq(groups, np.zeros((0, 2)), np.zeros(0)) == 0


def test_opt_seq_single_context_prefers_nonmember():
    groups = GroupSet((GroupFunction.from_conjunction((0,)),
                       GroupFunction.from_conjunction((1,))))
    # context has feature 0 set only: group 0 is a member, group 1 is not
    assert opt_seq(groups, np.array([[1, 0]]), np.array([1.0])) == 1


def test_opt_seq_length_mismatch():
    groups = GroupSet((GroupFunction.from_conjunction((0,)),))
    with pytest.raises(ConfigurationError):
        opt_seq(groups, np.ones((2, 1)), np.ones(3))


@pytest.mark.parametrize("seed", range(200))
def test_opt_seq_matches_brute_force(seed):
    rng = np.random.default_rng(seed + 1000)
    d = int(rng.integers(1, 7))
    t = int(rng.integers(1, 51))
    num_groups = int(rng.integers(1, 65))
    funcs = tuple(
        GroupFunction.from_conjunction(
            tuple(j for j in range(d) if rng.random() < 0.5))
        for _ in range(num_groups))
    groups = GroupSet(funcs)
    contexts = rng.integers(0, 2, size=(t, d))
    costs = rng.integers(-8, 9, size=t).astype(float)  # exact in float64
    scores = [float(sum(evaluate(g, contexts[i]) * costs[i] for i in range(t)))
              for g in funcs]
    best = min(range(num_groups), key=lambda g: (scores[g], g))
    assert opt_seq(groups, contexts, costs) == best


# ---------------------------------------------------------------------------
# Separators
# ---------------------------------------------------------------------------

def test_conjunction_separator_d2():
    sep = conjunction_separator(2)
    np.testing.assert_array_equal(sep.points, [[0, 1], [1, 0]])


def test_conjunction_separator_d1():
    sep = conjunction_separator(1)
    np.testing.assert_array_equal(sep.points, [[0]])
    g_empty = GroupFunction.from_conjunction(())
    g_full = GroupFunction.from_conjunction((0,))
    assert evaluate(g_empty, sep.points[0]) != evaluate(g_full, sep.points[0])


def test_conjunction_separator_separates_pair_twice():
    sep = conjunction_separator(3)
    g0 = GroupFunction.from_conjunction((0,))
    g1 = GroupFunction.from_conjunction((1,))
    # zeroed coordinate 0: g0 rejected, g1 accepted; symmetric at coordinate 1
    assert evaluate(g0, sep.points[0]) == 0 and evaluate(g1, sep.points[0]) == 1
    assert evaluate(g0, sep.points[1]) == 1 and evaluate(g1, sep.points[1]) == 0


@pytest.mark.parametrize("d", range(1, 7))
def test_separator_covers_all_monotone_conjunctions(d):
    groups = GroupSet(tuple(all_conjunctions(d)))
    ok, pair = verify_separator(groups, conjunction_separator(d))
    assert ok and pair is None


def test_duplicate_group_fails_verification():
    groups = GroupSet((GroupFunction.from_conjunction((0,)),
                       GroupFunction.from_conjunction((1,)),
                       GroupFunction.from_conjunction((0,))))
    ok, pair = verify_separator(groups, conjunction_separator(2))
    assert not ok
    assert pair == (0, 2)


def test_single_group_vacuously_separated():
    groups = GroupSet((GroupFunction.from_conjunction((0,)),))
    ok, pair = verify_separator(groups, conjunction_separator(2))
    assert ok and pair is None


# ---------------------------------------------------------------------------
# Implicit conjunction class
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_implicit_argmin_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 7))
    t = int(rng.integers(1, 20))
    contexts = rng.integers(0, 2, size=(t, d))
    costs = rng.normal(size=t)
    groups = GroupSet(tuple(all_conjunctions(d)))
    expected = opt_seq(groups, contexts, costs)
    assert conjunction_class_argmin(contexts, costs, d) == expected


def test_implicit_argmin_large_d_runs():
    rng = np.random.default_rng(0)
    d = 18
    contexts = rng.integers(0, 2, size=(5, d))
    costs = -np.ones(5)
    # all costs negative: the empty conjunction (mask 0) accepts every
    # context and is the unique minimizer
    assert conjunction_class_argmin(contexts, costs, d) == 0
