"""Shared fixtures and independent brute-force oracles for the test suite.

The oracles here deliberately avoid the library's dynamic-programming paths:
values come from explicit sums over entire trajectory trees, and optima from
enumeration over all deterministic time-indexed policies.
"""
from __future__ import annotations

import itertools

import numpy as np

from fairmdp import GroupFunction, GroupSet, Policy, TabularMDP

STAY, GO = 0, 1


def two_state_chain(horizon: int = 2) -> TabularMDP:
    """Two states; action 0 holds, action 1 flips; reward 1 at state 1."""
    P = np.zeros((2, 2, 2))
    P[0, STAY, 0] = P[1, STAY, 1] = 1.0
    P[0, GO, 1] = P[1, GO, 0] = 1.0
    r = np.array([[0.0, 0.0], [1.0, 1.0]])
    return TabularMDP(num_states=2, num_actions=2, horizon=horizon,
                      transitions=P, rewards=r,
                      initial_dist=np.array([1.0, 0.0]),
                      features=np.array([[1, 0], [0, 1]]))


def chain_groups(mdp: TabularMDP) -> GroupSet:
    """g0 = {state 0}, g1 = {state 1}."""
    return GroupSet((GroupFunction.from_bits([1, 0]),
                     GroupFunction.from_bits([0, 1])),
                    features=mdp.features)


def const_policy(mdp: TabularMDP, action: int) -> Policy:
    return Policy.deterministic(
        np.full((mdp.horizon, mdp.num_states), action, dtype=int),
        mdp.num_actions)


def brute_force_values(mdp: TabularMDP, policy: Policy, groups: GroupSet):
    """Exact values by summing over the full trajectory tree (no DP)."""
    member = groups.membership()

    def from_state(h: int, s: int):
        if h == mdp.horizon:
            return 0.0, np.zeros(len(groups))
        total = 0.0
        grp = np.zeros(len(groups))
        for a in range(mdp.num_actions):
            pa = policy.probs[h, s, a]
            if pa == 0.0:
                continue
            reward = mdp.rewards[s, a]
            total += pa * reward
            grp = grp + pa * reward * member[:, s]
            for s2 in range(mdp.num_states):
                q = mdp.transitions[s, a, s2]
                if q == 0.0:
                    continue
                t2, g2 = from_state(h + 1, s2)
                total += pa * q * t2
                grp = grp + pa * q * g2
        return total, grp

    total = 0.0
    grp = np.zeros(len(groups))
    for s in range(mdp.num_states):
        w = mdp.initial_dist[s]
        if w > 0.0:
            t, g = from_state(0, s)
            total += w * t
            grp = grp + w * g
    return total, grp


def all_deterministic_policies(mdp: TabularMDP):
    """Every deterministic time-indexed policy (use only on tiny instances)."""
    cells = mdp.horizon * mdp.num_states
    for choice in itertools.product(range(mdp.num_actions), repeat=cells):
        acts = np.array(choice, dtype=int).reshape(mdp.horizon, mdp.num_states)
        yield Policy.deterministic(acts, mdp.num_actions)


def random_explicit_groups(num_groups: int, num_states: int,
                           rng: np.random.Generator,
                           features: np.ndarray | None = None) -> GroupSet:
    """Random nonempty explicit groups over the given states."""
    funcs = []
    for _ in range(num_groups):
        bits = rng.integers(0, 2, size=num_states)
        if not bits.any():
            bits[int(rng.integers(num_states))] = 1
        funcs.append(GroupFunction.from_bits(bits))
    return GroupSet(tuple(funcs), features=features)


def ftpl_adversary_regret(groups: GroupSet, num_states: int, T: int, C: float,
                          seed: int) -> float:
    """Average realized regret of the tabular perturbed-leader strategy
    against a fixed random (state, cost) sequence:
    (1/T) * [sum_t c_t * g_t(s_t) - min_g sum_t c_t * g(s_t)].
    """
    from fairmdp import ftpl_init, ftpl_step

    rng = np.random.default_rng(seed)
    states = rng.integers(0, num_states, size=T)
    costs = rng.random(T)
    member = groups.membership()
    state = ftpl_init(num_states, C, T, seed=seed + 1)
    realized = 0.0
    per_group = np.zeros(len(groups))
    for t in range(T):
        g_t, _, state = ftpl_step(state, groups, (int(states[t]), float(costs[t])))
        realized += costs[t] * member[g_t, states[t]]
        per_group += costs[t] * member[:, states[t]]
    return (realized - per_group.min()) / T


def ctx_ftpl_adversary_regret(feature_dim: int, T: int, C: float,
                              seed: int) -> float:
    """Average realized regret of the contextual strategy over the singleton
    conjunction groups, against a fixed random (context, cost) sequence."""
    from fairmdp import (GroupFunction, GroupSet, conjunction_separator,
                         ctx_ftpl_init, ctx_ftpl_step)

    groups = GroupSet(tuple(GroupFunction.from_conjunction((j,))
                            for j in range(feature_dim)))
    sep = conjunction_separator(feature_dim)
    rng = np.random.default_rng(seed)
    contexts = rng.integers(0, 2, size=(T, feature_dim)).astype(np.uint8)
    costs = rng.random(T)
    state = ctx_ftpl_init(groups, sep, T, C=C, seed=seed + 1)
    realized = 0.0
    per_group = np.zeros(feature_dim)
    for t in range(T):
        g_t, _, state = ctx_ftpl_step(state, groups,
                                      (contexts[t], float(costs[t])))
        member = contexts[t].astype(float)
        realized += costs[t] * member[g_t]
        per_group += costs[t] * member
    return (realized - per_group.min()) / T
