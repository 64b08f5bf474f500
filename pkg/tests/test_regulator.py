import numpy as np
import pytest

from fairmdp import (ConfigurationError, GroupFunction, GroupSet,
                     LagrangeWeights, PolicyMixture, TabularMDP,
                     best_response_lambda, conjunction_separator,
                     ctx_ftpl_err_canc_step, ctx_ftpl_init,
                     ctx_ftpl_noise_scale, ctx_ftpl_step,
                     estimate_clipped_violations, ftpl_init, ftpl_noise_scale,
                     ftpl_step, mixture_values)

from helpers import (GO, STAY, chain_groups, const_policy,
                     ftpl_adversary_regret, random_explicit_groups,
                     two_state_chain)


def _is_zero_or_vertex(lam: LagrangeWeights, C: float) -> bool:
    v = lam.values
    if np.all(v == 0):
        return True
    nz = np.flatnonzero(v)
    return len(nz) == 1 and v[nz[0]] == C


# ---------------------------------------------------------------------------
# Exact best response
# ---------------------------------------------------------------------------

def test_best_response_lambda_feasible_returns_zero():
    lam = best_response_lambda(np.array([0.0, 0.3, 1.2]), alpha=0.0, C=25.0)
    np.testing.assert_array_equal(lam.values, 0.0)


def test_best_response_lambda_most_violated():
    lam = best_response_lambda(np.array([0.5, 0.1, 0.3]), alpha=0.2, C=25.0)
    np.testing.assert_array_equal(lam.values, [0.0, 25.0, 0.0])


def test_best_response_lambda_tie_breaks_low_index():
    lam = best_response_lambda(np.array([0.1, 0.1]), alpha=0.2, C=10.0)
    np.testing.assert_array_equal(lam.values, [10.0, 0.0])


def test_lagrange_weights_invariants():
    with pytest.raises(ConfigurationError):
        LagrangeWeights(np.array([-0.1, 0.0]), 1.0)
    with pytest.raises(ConfigurationError):
        LagrangeWeights(np.array([0.6, 0.6]), 1.0)


# ---------------------------------------------------------------------------
# Tabular perturbed leader
# ---------------------------------------------------------------------------

def test_ftpl_noise_scale_values():
    assert ftpl_noise_scale(2.0, 1, 1) == pytest.approx(1.0)
    assert ftpl_noise_scale(25.0, 12, 600) == pytest.approx(25 / 600, abs=1e-12)
    assert ftpl_noise_scale(25.0, 12, 600) == pytest.approx(0.0416666667)


def test_ftpl_init_zero_history():
    state = ftpl_init(4, C=25.0, T=10, seed=0)
    np.testing.assert_array_equal(state.cumulative_costs, 0.0)
    assert state.round == 1


def test_ftpl_first_round_is_pure_noise():
    groups = random_explicit_groups(3, 5, np.random.default_rng(0))
    member = groups.membership()
    state = ftpl_init(5, C=2.0, T=100, seed=42)
    # mirror the strategy's single uniform draw for the round
    noise = np.random.default_rng(42).uniform(0, 1 / state.eta, size=5)
    expected = int(np.argmin(member @ noise))
    g, lam, _ = ftpl_step(state, groups, (0, 0.5))
    assert g == expected
    assert _is_zero_or_vertex(lam, 2.0)


def test_ftpl_noise_disabled_follows_the_leader():
    groups = GroupSet((GroupFunction.from_bits([1, 0]),
                       GroupFunction.from_bits([0, 1])))
    state = ftpl_init(2, C=5.0, T=10, seed=3, noise_enabled=False)
    state.cumulative_costs[:] = [4.0, 1.0]
    g, _, _ = ftpl_step(state, groups, (0, 0.0))
    assert g == 1


def test_ftpl_bounded_noise_respects_large_gap():
    groups = GroupSet((GroupFunction.from_bits([1, 0]),
                       GroupFunction.from_bits([0, 1])))
    for seed in range(20):
        state = ftpl_init(2, C=5.0, T=10, seed=seed)
        state.eta = 0.3  # noise bounded by 1/eta < 4, below the 5 vs 1 gap
        state.cumulative_costs[:] = [5.0, 1.0]
        g, _, _ = ftpl_step(state, groups, (0, 0.0))
        assert g == 1


def test_ftpl_selection_precedes_cost_recording():
    groups = GroupSet((GroupFunction.from_bits([1, 0]),
                       GroupFunction.from_bits([0, 1])))
    state = ftpl_init(2, C=1.0, T=5, seed=0, noise_enabled=False)
    g, _, state = ftpl_step(state, groups, (1, 1.0))
    assert g == 0  # zero history ties toward group 0 despite the s1 cost
    np.testing.assert_array_equal(state.cumulative_costs, [0.0, 1.0])
    g2, _, _ = ftpl_step(state, groups, (0, 0.0))
    assert g2 == 0  # now s1 carries cost, so group 0 is the leader


def test_ftpl_rejects_out_of_range_cost():
    groups = GroupSet((GroupFunction.from_bits([1, 0]),))
    state = ftpl_init(2, C=1.0, T=5, seed=0)
    with pytest.raises(ConfigurationError):
        ftpl_step(state, groups, (0, 1.5))


def test_ftpl_argmin_invariant_under_aligned_shift():
    # groups with equal support sizes: a constant added to every state's
    # cost shifts all group scores equally and cannot change the argmin
    rng = np.random.default_rng(7)
    groups = GroupSet((GroupFunction.from_bits([1, 1, 0, 0]),
                       GroupFunction.from_bits([0, 1, 1, 0]),
                       GroupFunction.from_bits([1, 0, 0, 1])))
    for trial in range(20):
        costs = rng.random(4) * 3
        base = ftpl_init(4, C=1.0, T=5, noise_enabled=False)
        base.cumulative_costs[:] = costs
        shifted = ftpl_init(4, C=1.0, T=5, noise_enabled=False)
        shifted.cumulative_costs[:] = costs + 0.9
        g1, _, _ = ftpl_step(base, groups, (0, 0.0))
        g2, _, _ = ftpl_step(shifted, groups, (0, 0.0))
        assert g1 == g2


def test_ftpl_empirical_regret_within_bound():
    # loose sanity version of the long-horizon acceptance check
    rng = np.random.default_rng(0)
    num_states, T, C = 6, 1000, 25.0
    bound = np.sqrt(8 * num_states**3) / np.sqrt(T)
    for seed in range(5):
        groups = random_explicit_groups(6, num_states,
                                        np.random.default_rng(seed))
        avg_regret = ftpl_adversary_regret(groups, num_states, T, C, seed)
        assert avg_regret <= bound


# ---------------------------------------------------------------------------
# Contextual perturbed leader
# ---------------------------------------------------------------------------

def _singleton_groups(d: int) -> GroupSet:
    return GroupSet(tuple(GroupFunction.from_conjunction((j,))
                          for j in range(d)))


def test_ctx_noise_scale_values():
    assert ctx_ftpl_noise_scale(np.e, 1, 1) == pytest.approx(1.0)
    assert ctx_ftpl_noise_scale(8, 4, 100) == pytest.approx(
        np.sqrt(np.log(8) / 200), abs=1e-12)
    assert ctx_ftpl_noise_scale(8, 4, 100) == pytest.approx(0.10198, abs=2e-5)


def test_ctx_init_empty_history():
    groups = _singleton_groups(3)
    state = ctx_ftpl_init(groups, conjunction_separator(3), T=10, C=5.0, seed=0)
    assert state.contexts == [] and state.costs == []
    np.testing.assert_array_equal(state.cumulative_group_costs, 0.0)


def test_ctx_init_rejects_unverified_separator():
    groups = GroupSet((GroupFunction.from_conjunction((0,)),
                       GroupFunction.from_conjunction((0,))))
    with pytest.raises(ConfigurationError):
        ctx_ftpl_init(groups, conjunction_separator(2), T=10, C=5.0)


def test_ctx_first_round_noise_only():
    groups = _singleton_groups(2)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=10, C=5.0,
                          seed=0, noise_enabled=False)
    g, lam, _ = ctx_ftpl_step(state, groups, (np.array([1, 1]), 0.3))
    assert g == 0  # no noise, no history: tie toward group 0
    assert _is_zero_or_vertex(lam, 5.0)


def test_ctx_history_drives_selection():
    groups = _singleton_groups(2)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=10, C=5.0,
                          seed=0, noise_enabled=False)
    # context where group 0 is a member and group 1 is not, with cost 0.9
    ctx_ftpl_step(state, groups, (np.array([1, 0]), 0.9))
    g, _, _ = ctx_ftpl_step(state, groups, (np.array([1, 1]), 0.1))
    assert g == 1


def test_ctx_symmetric_groups_select_evenly():
    groups = _singleton_groups(2)
    T = 10_000
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=T, C=5.0, seed=11)
    picks = np.zeros(2)
    for _ in range(T):
        # both groups are members of (1,1), so their accumulated costs stay
        # equal and only the symmetric noise decides
        g, _, state = ctx_ftpl_step(state, groups, (np.array([1, 1]), 0.5))
        picks[g] += 1
    assert abs(picks[0] / T - 0.5) <= 0.05


def test_ctx_accepts_state_index_contexts():
    features = np.array([[1, 0], [0, 1]])
    groups = GroupSet((GroupFunction.from_conjunction((0,)),
                       GroupFunction.from_conjunction((1,))),
                      features=features)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=5, C=1.0,
                          seed=0, noise_enabled=False)
    ctx_ftpl_step(state, groups, (0, 1.0))  # state 0 has features (1, 0)
    g, _, _ = ctx_ftpl_step(state, groups, (1, 0.0))
    assert g == 1


# ---------------------------------------------------------------------------
# Clipped-violation rounds
# ---------------------------------------------------------------------------

def test_err_canc_zero_costs_noise_driven():
    groups = _singleton_groups(2)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=1000, C=5.0,
                          seed=3)
    picks = np.zeros(2)
    for _ in range(500):
        g, lam, state = ctx_ftpl_err_canc_step(state, groups, np.zeros(2))
        picks[g] += 1
        assert _is_zero_or_vertex(lam, 5.0)
    assert picks.min() > 0  # pure noise flips the selection both ways


def test_err_canc_persistent_violation_wins():
    groups = _singleton_groups(2)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=100, C=5.0,
                          seed=0, noise_enabled=False)
    target = 0.05
    for _ in range(3):
        g, _, state = ctx_ftpl_err_canc_step(
            state, groups, np.array([0.0, target]))
    assert g == 1
    # noise bounded below the accumulated gap still picks the violated group
    noisy = ctx_ftpl_init(groups, conjunction_separator(2), T=100, C=5.0,
                          seed=1)
    noisy.rho = 1e-4
    for _ in range(50):
        g, _, noisy = ctx_ftpl_err_canc_step(
            noisy, groups, np.array([0.0, target]))
    assert g == 1


def test_err_canc_cumulative_costs_nondecreasing():
    groups = _singleton_groups(2)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=50, C=5.0, seed=2)
    prev = state.cumulative_group_costs.copy()
    rng = np.random.default_rng(0)
    for _ in range(50):
        _, _, state = ctx_ftpl_err_canc_step(state, groups, rng.random(2) * 0.1)
        assert (state.cumulative_group_costs >= prev - 1e-15).all()
        prev = state.cumulative_group_costs.copy()


def test_err_canc_rejects_negative_costs():
    groups = _singleton_groups(2)
    state = ctx_ftpl_init(groups, conjunction_separator(2), T=5, C=5.0, seed=0)
    with pytest.raises(ConfigurationError):
        ctx_ftpl_err_canc_step(state, groups, np.array([-0.01, 0.0]))


# ---------------------------------------------------------------------------
# Clipped violation estimation
# ---------------------------------------------------------------------------

def test_estimate_boundary_reward_gives_zero_violation():
    # single absorbing state earning exactly alpha/H each step
    P = np.ones((1, 1, 1))
    mdp = TabularMDP(1, 1, 4, P, np.array([[0.25]]), np.array([1.0]),
                     np.array([[1]]))
    groups = GroupSet((GroupFunction.from_bits([1]),
                       GroupFunction.from_bits([0])), features=mdp.features)
    mix = PolicyMixture.point_mass(const_policy(mdp, 0))
    est = estimate_clipped_violations(mdp, mix, groups, alpha=1.0, n=200,
                                      rng_seed=0)
    assert est.violations[0] == 0.0
    # the empty group never collects reward: maximal violation alpha/H
    assert est.violations[1] == pytest.approx(0.25)


def test_estimate_matches_exact_within_hoeffding():
    mdp = two_state_chain()
    groups = chain_groups(mdp)
    mix = PolicyMixture((const_policy(mdp, GO), const_policy(mdp, STAY)),
                        np.array([0.5, 0.5]))
    n = 10_000
    alpha = 0.5  # alpha/H = 0.25
    est = estimate_clipped_violations(mdp, mix, groups, alpha, n, rng_seed=9)
    _, group = mixture_values(mdp, mix, groups)
    exact = np.maximum(alpha / mdp.horizon - group / mdp.horizon, 0.0)
    np.testing.assert_allclose(est.violations, exact,
                               atol=3 * np.sqrt(1 / (4 * n)))
