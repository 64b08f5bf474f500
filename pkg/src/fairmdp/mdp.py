"""Episodic tabular MDPs with per-state feature annotations.

Provides the core value types (MDP, time-indexed policies, policy mixtures,
trajectories) together with seeded rollouts, exact dynamic-programming
evaluation of total and per-group reward, Monte-Carlo evaluation, reward
scalarization under Lagrange weights, and finite-horizon value iteration.

All value types are immutable after construction and safe to share across
threads.  Episode sampling lays out one row of uniform draws per episode, so
episode ``e`` of a seeded batch always consumes the same randomness no matter
how the batch is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

PROB_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite episodic MDP with time-invariant dynamics and rewards.

    Attributes:
        num_states: number of states S.
        num_actions: number of actions A.
        horizon: episode length H (rewards are collected at steps 0..H-1).
        transitions: (S, A, S) array; row [s, a] is the next-state distribution.
        rewards: (S, A) array of rewards in [0, 1].
        initial_dist: (S,) initial state distribution.
        features: (S, d) boolean feature table, one row per state.
    """

    num_states: int
    num_actions: int
    horizon: int
    transitions: np.ndarray
    rewards: np.ndarray
    initial_dist: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        S, A = self.num_states, self.num_actions
        if S < 1 or A < 1 or self.horizon < 0:
            raise ConfigurationError(
                f"need num_states >= 1, num_actions >= 1, horizon >= 0; got "
                f"({S}, {A}, {self.horizon})")
        P = np.array(self.transitions, dtype=float)
        r = np.array(self.rewards, dtype=float)
        mu = np.array(self.initial_dist, dtype=float)
        x = np.array(self.features)
        if P.shape != (S, A, S):
            raise ConfigurationError(
                f"transitions shape {P.shape} != {(S, A, S)}")
        if r.shape != (S, A):
            raise ConfigurationError(f"rewards shape {r.shape} != {(S, A)}")
        if mu.shape != (S,):
            raise ConfigurationError(
                f"initial_dist shape {mu.shape} != {(S,)}")
        if x.ndim != 2 or x.shape[0] != S:
            raise ConfigurationError(
                f"features must be a (num_states, d) table, got shape {x.shape}")

        bad = np.argwhere(P < 0)
        if bad.size:
            s, a, t = bad[0]
            raise ConfigurationError(
                f"transition entry (state={s}, action={a}, next={t}) is "
                f"negative: {P[s, a, t]}")
        sums = P.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            s, a = bad[0]
            raise ConfigurationError(
                f"transition row (state={s}, action={a}) sums to "
                f"{sums[s, a]!r}, expected 1")
        bad = np.argwhere((r < 0) | (r > 1))
        if bad.size:
            s, a = bad[0]
            raise ConfigurationError(
                f"reward (state={s}, action={a}) is {r[s, a]!r}, outside [0, 1]")
        bad = np.argwhere(mu < 0)
        if bad.size:
            raise ConfigurationError(
                f"initial_dist entry (state={bad[0][0]}) is negative")
        if abs(mu.sum() - 1.0) > PROB_TOL:
            raise ConfigurationError(
                f"initial_dist sums to {mu.sum()!r}, expected 1")
        xb = x.astype(float)
        bad = np.argwhere((xb != 0) & (xb != 1))
        if bad.size:
            s, j = bad[0]
            raise ConfigurationError(
                f"feature (state={s}, index={j}) is {x[s, j]!r}, not a bit")

        object.__setattr__(self, "transitions", _readonly(P))
        object.__setattr__(self, "rewards", _readonly(r))
        object.__setattr__(self, "initial_dist", _readonly(mu))
        object.__setattr__(self, "features", _readonly(x.astype(np.uint8)))

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class Policy:
    """Time-indexed stochastic policy: probs[h, s] is a distribution over actions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 3:
            raise ConfigurationError(
                f"policy table must be (H, S, A), got shape {p.shape}")
        if np.any(p < 0):
            h, s, a = np.argwhere(p < 0)[0]
            raise ConfigurationError(
                f"policy entry (h={h}, state={s}, action={a}) is negative")
        if p.shape[0] > 0:
            sums = p.sum(axis=2)
            bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
            if bad.size:
                h, s = bad[0]
                raise ConfigurationError(
                    f"policy row (h={h}, state={s}) sums to {sums[h, s]!r}")
        object.__setattr__(self, "probs", _readonly(p))

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @property
    def num_states(self) -> int:
        return self.probs.shape[1]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[2]

    @classmethod
    def deterministic(cls, actions: np.ndarray, num_actions: int) -> "Policy":
        """Build a pure policy from an (H, S) table of action indices."""
        acts = np.asarray(actions, dtype=int)
        H, S = acts.shape
        p = np.zeros((H, S, num_actions))
        hh, ss = np.meshgrid(np.arange(H), np.arange(S), indexing="ij")
        p[hh, ss, acts] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, horizon: int, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    def key(self) -> bytes:
        """Content key for deduplicating identical policies."""
        return self.probs.tobytes()


def _check_compatible(mdp: TabularMDP, policy: Policy):
    if (policy.horizon, policy.num_states, policy.num_actions) != (
            mdp.horizon, mdp.num_states, mdp.num_actions):
        raise ConfigurationError(
            f"policy shaped {policy.probs.shape} does not match MDP "
            f"(H={mdp.horizon}, S={mdp.num_states}, A={mdp.num_actions})")


@dataclass(frozen=True, eq=False)
class PolicyMixture:
    """Finitely supported distribution over policies."""

    policies: tuple
    weights: np.ndarray

    def __post_init__(self):
        if len(self.policies) == 0:
            raise ConfigurationError("mixture support must be nonempty")
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(self.policies),):
            raise ConfigurationError(
                f"{len(self.policies)} policies but weight shape {w.shape}")
        if np.any(w < 0):
            raise ConfigurationError("mixture weights must be nonnegative")
        if abs(w.sum() - 1.0) > PROB_TOL:
            raise ConfigurationError(f"mixture weights sum to {w.sum()!r}")
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "weights", _readonly(w))

    @classmethod
    def point_mass(cls, policy: Policy) -> "PolicyMixture":
        return cls((policy,), np.array([1.0]))

    @classmethod
    def from_counts(cls, policies, counts) -> "PolicyMixture":
        """Mixture with weights proportional to counts, deduplicating support."""
        seen: dict[bytes, int] = {}
        support: list[Policy] = []
        weights: list[float] = []
        for pol, c in zip(policies, counts):
            k = pol.key()
            if k in seen:
                weights[seen[k]] += c
            else:
                seen[k] = len(support)
                support.append(pol)
                weights.append(float(c))
        w = np.array(weights)
        return cls(tuple(support), w / w.sum())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One episode: arrays of visited states, chosen actions, and collected rewards."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __len__(self) -> int:
        return len(self.states)

    @property
    def steps(self):
        return list(zip(self.states.tolist(), self.actions.tolist(),
                        self.rewards.tolist()))


@dataclass(frozen=True, eq=False)
class ScalarizedReward:
    """Reward table blending the base reward with weighted group bonuses.

    table[s, a] = r[s, a] * (1 + sum_g lam[g] * g(s)) - (alpha / H) * sum_g lam[g]
    """

    table: np.ndarray
    alpha: float
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "table", _readonly(np.array(self.table, dtype=float)))
        object.__setattr__(self, "lam", _readonly(np.array(self.lam, dtype=float)))


# ---------------------------------------------------------------------------
# Seeded rollouts
# ---------------------------------------------------------------------------

def _sample_rows(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sample one index per row; u in [0, 1), rows ~sum to 1."""
    cum = np.cumsum(rows, axis=1)
    idx = (cum < u[:, None] * cum[:, -1:]).sum(axis=1)
    return np.minimum(idx, rows.shape[1] - 1)


def _rollout_batch(mdp: TabularMDP, mixture: PolicyMixture, num_episodes: int,
                   rng: np.random.Generator):
    """Roll `num_episodes` episodes, each under a policy drawn from `mixture`.

    Returns (states, actions, rewards), each (num_episodes, H).  Episode e's
    randomness is row e of a single uniform block, so draws per episode depend
    only on (seed, episode index, step).
    """
    H, S = mdp.horizon, mdp.num_states
    n = num_episodes
    u = rng.random((n, 2 * H + 2))
    cum_w = np.cumsum(mixture.weights)
    pick = np.minimum(np.searchsorted(cum_w, u[:, 0] * cum_w[-1], side="right"),
                      len(mixture.policies) - 1)
    stack = np.stack([p.probs for p in mixture.policies])  # (K, H, S, A)
    states = np.empty((n, H), dtype=np.int64)
    actions = np.empty((n, H), dtype=np.int64)
    s = _sample_rows(np.broadcast_to(mdp.initial_dist, (n, S)), u[:, 1])
    for h in range(H):
        a = _sample_rows(stack[pick, h, s], u[:, 2 + h])
        states[:, h] = s
        actions[:, h] = a
        s = _sample_rows(mdp.transitions[s, a], u[:, 2 + H + h])
    rewards = mdp.rewards[states, actions] if H > 0 else np.zeros((n, 0))
    return states, actions, rewards


def sample_trajectory(mdp: TabularMDP, policy: Policy, rng_seed: int) -> Trajectory:
    """Sample one episode under `policy`; deterministic given `rng_seed`."""
    _check_compatible(mdp, policy)
    rng = np.random.default_rng(rng_seed)
    states, actions, rewards = _rollout_batch(
        mdp, PolicyMixture.point_mass(policy), 1, rng)
    return Trajectory(states[0].copy(), actions[0].copy(), rewards[0].copy())


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

def exact_values(mdp: TabularMDP, policy: Policy, groups):
    """Exact (V_tot, per-group V) by propagating the state distribution.

    V_g is the expected sum over steps of reward collected at states belonging
    to group g.  No sampling is involved.
    """
    _check_compatible(mdp, policy)
    member = groups.membership()  # (G, S)
    dist = mdp.initial_dist.astype(float)
    total = 0.0
    per_group = np.zeros(len(groups))
    for h in range(mdp.horizon):
        sa = dist[:, None] * policy.probs[h]               # (S, A)
        state_reward = (sa * mdp.rewards).sum(axis=1)       # (S,)
        total += float(state_reward.sum())
        per_group += member @ state_reward
        dist = np.tensordot(sa, mdp.transitions, axes=([0, 1], [0, 1]))
    return total, per_group


def mixture_values(mdp: TabularMDP, mixture: PolicyMixture, groups):
    """Weight-averaged exact values over the mixture's support (exact linearity)."""
    total = 0.0
    per_group = np.zeros(len(groups))
    for w, pol in zip(mixture.weights, mixture.policies):
        t, g = exact_values(mdp, pol, groups)
        total += w * t
        per_group += w * g
    return total, per_group


@dataclass(frozen=True)
class MonteCarloValues:
    """Sample means and standard errors of episodic total/per-group reward."""

    total_mean: float
    total_se: float
    group_means: np.ndarray
    group_ses: np.ndarray
    num_episodes: int


def monte_carlo_group_values(mdp: TabularMDP, mixture: PolicyMixture, groups,
                             num_episodes: int, rng_seed: int) -> MonteCarloValues:
    """Estimate mixture values from seeded rollouts.

    Each episode draws a policy from the mixture, rolls a trajectory, and
    accumulates total reward and reward gated by group membership of the
    visited states.
    """
    if num_episodes < 1:
        raise ConfigurationError("num_episodes must be >= 1")
    for pol in mixture.policies:
        _check_compatible(mdp, pol)
    rng = np.random.default_rng(rng_seed)
    states, _, rewards = _rollout_batch(mdp, mixture, num_episodes, rng)
    member = groups.membership()                      # (G, S)
    totals = rewards.sum(axis=1)                      # (n,)
    gated = member[:, states] * rewards[None, :, :]   # (G, n, H)
    per_episode = gated.sum(axis=2)                   # (G, n)

    def se(x):
        if num_episodes == 1:
            return 0.0
        return float(np.std(x, ddof=1) / np.sqrt(num_episodes))

    return MonteCarloValues(
        total_mean=float(totals.mean()),
        total_se=se(totals),
        group_means=per_episode.mean(axis=1),
        group_ses=np.array([se(per_episode[i]) for i in range(len(groups))]),
        num_episodes=num_episodes,
    )


def occupancy_distribution(mdp: TabularMDP, mixture: PolicyMixture,
                           num_episodes: int, rng_seed: int) -> np.ndarray:
    """Normalized visit counts over all H * num_episodes visited states."""
    if num_episodes < 1:
        raise ConfigurationError("num_episodes must be >= 1")
    rng = np.random.default_rng(rng_seed)
    states, _, _ = _rollout_batch(mdp, mixture, num_episodes, rng)
    counts = np.bincount(states.ravel(), minlength=mdp.num_states).astype(float)
    return counts / counts.sum()


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy in nats of a probability vector; zero entries contribute zero."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


# ---------------------------------------------------------------------------
# Scalarization and the learner's best response
# ---------------------------------------------------------------------------

def scalarize(mdp: TabularMDP, groups, lam, alpha: float) -> ScalarizedReward:
    """Fold group weights into a single reward table.

    The episodic value of any policy under the returned table equals
    V_tot + sum_g lam[g] * (V_g - alpha), so a standard planner on the
    reweighted MDP computes the learner's best response.
    """
    lam_values = np.asarray(getattr(lam, "values", lam), dtype=float)
    if lam_values.shape != (len(groups),):
        raise ConfigurationError(
            f"lambda has shape {lam_values.shape}, expected ({len(groups)},)")
    member = groups.membership()
    state_weight = 1.0 + lam_values @ member            # (S,)
    offset = (alpha / mdp.horizon) * lam_values.sum() if mdp.horizon > 0 else 0.0
    table = mdp.rewards * state_weight[:, None] - offset
    return ScalarizedReward(table=table, alpha=float(alpha), lam=lam_values)


def value_iteration(mdp: TabularMDP, reward_table: np.ndarray):
    """Finite-horizon backward induction on an arbitrary (possibly signed)
    reward table; ties break toward the lowest action index.

    Returns (policy, value of the policy from the initial distribution).
    """
    reward_table = np.asarray(reward_table, dtype=float)
    if reward_table.shape != (mdp.num_states, mdp.num_actions):
        raise ConfigurationError(
            f"reward table shape {reward_table.shape} != "
            f"{(mdp.num_states, mdp.num_actions)}")
    H, S = mdp.horizon, mdp.num_states
    v = np.zeros(S)
    acts = np.empty((H, S), dtype=int)
    for h in range(H - 1, -1, -1):
        q = reward_table + mdp.transitions @ v    # (S, A)
        acts[h] = np.argmax(q, axis=1)
        v = q[np.arange(S), acts[h]]
    policy = Policy.deterministic(acts, mdp.num_actions) if H > 0 else \
        Policy(np.zeros((0, S, mdp.num_actions)))
    return policy, float(mdp.initial_dist @ v)


def best_response_policy(mdp: TabularMDP, groups, lam, alpha: float) -> Policy:
    """Deterministic optimal policy for the reweighted MDP (exact planner)."""
    scal = scalarize(mdp, groups, lam, alpha)
    policy, _ = value_iteration(mdp, scal.table)
    return policy
