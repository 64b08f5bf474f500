"""Environment generators: preferential-attachment graph MDPs and random
tabular instances for property tests.

The graph MDP treats nodes as states.  Action 0 is a self-loop; actions
1..deg(s) move along the incident edges in sorted-neighbor order, and any
surplus actions (states share one action count) alias the self-loop.  By
default nodes are grouped by degree bucket (<=2, ==3, >=4) with rewards
0.1 / 0.2 / 0.3 per bucket, and the start state is uniform over nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .groups import GroupFunction, GroupSet
from .mdp import TabularMDP

DEGREE_BUCKET_REWARDS = (0.1, 0.2, 0.3)


@dataclass(frozen=True)
class BaGraphSpec:
    """Growth recipe: seed clique of (edges_per_new_node + 1) nodes, then one
    node per round attaching to distinct existing nodes with probability
    proportional to current degree."""

    num_nodes: int
    edges_per_new_node: int
    horizon: int
    rng_seed: int = 0

    def __post_init__(self):
        if self.edges_per_new_node < 1:
            raise ConfigurationError("edges_per_new_node must be >= 1")
        if self.num_nodes < self.edges_per_new_node + 1:
            raise ConfigurationError(
                "num_nodes must be at least edges_per_new_node + 1")


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    edges: tuple  # tuple of sorted (u, v) pairs, u < v

    @property
    def adjacency(self) -> list:
        adj = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [sorted(n) for n in adj]

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def is_connected(self) -> bool:
        if self.num_nodes == 0:
            return True
        adj = self.adjacency
        seen = {0}
        stack = [0]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == self.num_nodes


def generate_ba_graph(spec: BaGraphSpec) -> Graph:
    """Grow a preferential-attachment graph; deterministic given the seed."""
    rng = np.random.default_rng(spec.rng_seed)
    m = spec.edges_per_new_node
    edges: list[tuple[int, int]] = [
        (i, j) for i in range(m + 1) for j in range(i + 1, m + 1)]
    # One entry per unit of degree; uniform picks from it are
    # degree-proportional.
    repeated = [node for edge in edges for node in edge]
    for new in range(m + 1, spec.num_nodes):
        targets: list[int] = []
        while len(targets) < m:
            pick = repeated[int(rng.integers(len(repeated)))]
            if pick not in targets:
                targets.append(pick)
        for tgt in targets:
            edges.append((min(new, tgt), max(new, tgt)))
        repeated.extend(targets)
        repeated.extend([new] * m)
    return Graph(num_nodes=spec.num_nodes, edges=tuple(sorted(edges)))


def degree_bucket(degree: int) -> int:
    """0 for degree <= 2, 1 for degree == 3, 2 for degree >= 4."""
    if degree <= 2:
        return 0
    if degree == 3:
        return 1
    return 2


def graph_to_mdp(graph: Graph, horizon: int, group_rule=None,
                 reward_rule=None) -> tuple[TabularMDP, GroupSet]:
    """Deterministic-move MDP over the graph's nodes.

    `group_rule` is an optional sequence of conjunctions (tuples of feature
    indices) over the three degree-bucket features; the default is the three
    singleton buckets.  `reward_rule` maps a node degree to a reward (default:
    0.1 / 0.2 / 0.3 by bucket); every action at a state earns that state's
    reward.
    """
    if not graph.is_connected():
        raise ConfigurationError("graph must be connected")
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    S = graph.num_nodes
    adj = graph.adjacency
    degrees = graph.degrees
    A = int(degrees.max()) + 1

    P = np.zeros((S, A, S))
    for s in range(S):
        P[s, 0, s] = 1.0
        for k in range(1, A):
            if k <= degrees[s]:
                P[s, k, adj[s][k - 1]] = 1.0
            else:
                P[s, k, s] = 1.0  # padded action aliases the self-loop

    if reward_rule is None:
        state_reward = np.array(
            [DEGREE_BUCKET_REWARDS[degree_bucket(int(d))] for d in degrees])
    else:
        state_reward = np.array([float(reward_rule(int(d))) for d in degrees])
    rewards = np.repeat(state_reward[:, None], A, axis=1)

    features = np.zeros((S, 3), dtype=np.uint8)
    features[np.arange(S), [degree_bucket(int(d)) for d in degrees]] = 1

    mdp = TabularMDP(
        num_states=S, num_actions=A, horizon=horizon, transitions=P,
        rewards=rewards, initial_dist=np.full(S, 1.0 / S), features=features)

    conjunctions = group_rule if group_rule is not None else [(0,), (1,), (2,)]
    groups = GroupSet(
        tuple(GroupFunction.from_conjunction(c) for c in conjunctions),
        features=features)
    return mdp, groups


def random_tabular_mdp(num_states: int, num_actions: int, horizon: int,
                       num_groups: int, rng_seed: int,
                       feature_dim: int = 4) -> tuple[TabularMDP, GroupSet]:
    """Random instance: uniform-simplex transition rows and initial
    distribution, uniform rewards, random feature bits, and random monotone
    conjunction groups.  Deterministic given the seed."""
    if min(num_states, num_actions, horizon, num_groups, feature_dim) < 1:
        raise ConfigurationError("all counts must be >= 1")
    rng = np.random.default_rng(rng_seed)
    gamma = rng.gamma(1.0, size=(num_states, num_actions, num_states))
    P = gamma / gamma.sum(axis=2, keepdims=True)
    mu_g = rng.gamma(1.0, size=num_states)
    mu = mu_g / mu_g.sum()
    rewards = rng.random((num_states, num_actions))
    features = rng.integers(0, 2, size=(num_states, feature_dim)).astype(np.uint8)
    conjunctions = []
    for _ in range(num_groups):
        mask = rng.integers(0, 2, size=feature_dim)
        conjunctions.append(GroupFunction.from_conjunction(
            [j for j in range(feature_dim) if mask[j]]))
    mdp = TabularMDP(
        num_states=num_states, num_actions=num_actions, horizon=horizon,
        transitions=P, rewards=rewards, initial_dist=mu, features=features)
    return mdp, GroupSet(tuple(conjunctions), features=features)
