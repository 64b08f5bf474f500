"""Regulator-side strategies for the constrained-MDP game.

The regulator picks nonnegative group weights with a bounded l1 budget.  All
strategies here respond with either the zero vector or the full budget on a
single group:

* `best_response_lambda` — exact response given per-group values;
* tabular follow-the-perturbed-leader over per-state cumulative costs, with
  uniform perturbations;
* contextual follow-the-perturbed-leader for conjunction groups, placing
  fresh Laplace noise on a separator set each round;
* a clipped-violation variant of the contextual strategy whose per-round
  costs are empirical constraint violations clipped at zero, so slack in one
  round can never cancel violation in another.

Strategy states are single-owner mutable values: one game loop advances one
state, and the step functions mutate it in place (also returning it).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .groups import GroupSet, SeparatorSet, verify_separator
from .mdp import PROB_TOL, PolicyMixture, TabularMDP, _rollout_batch


@dataclass(frozen=True, eq=False)
class LagrangeWeights:
    """Nonnegative per-group weights with sum bounded by the budget C."""

    values: np.ndarray
    bound: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if self.bound <= 0:
            raise ConfigurationError("budget C must be positive")
        if np.any(v < 0):
            raise ConfigurationError("lambda entries must be nonnegative")
        if v.sum() > self.bound + PROB_TOL:
            raise ConfigurationError(
                f"lambda sums to {v.sum()!r}, above the budget {self.bound}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, num_groups: int, bound: float) -> "LagrangeWeights":
        return cls(np.zeros(num_groups), bound)

    @classmethod
    def vertex(cls, num_groups: int, index: int, bound: float) -> "LagrangeWeights":
        v = np.zeros(num_groups)
        v[index] = bound
        return cls(v, bound)


def best_response_lambda(group_values, alpha: float, C: float) -> LagrangeWeights:
    """Zero if every group's value meets `alpha`, else the full budget on the
    group with the smallest value (lowest index on ties)."""
    v = np.asarray(group_values, dtype=float)
    if C <= 0:
        raise ConfigurationError("budget C must be positive")
    if np.all(v >= alpha):
        return LagrangeWeights.zero(len(v), C)
    return LagrangeWeights.vertex(len(v), int(np.argmin(v)), C)


# ---------------------------------------------------------------------------
# Tabular follow-the-perturbed-leader
# ---------------------------------------------------------------------------

def ftpl_noise_scale(C: float, num_states: int, T: int) -> float:
    """Perturbation parameter eta = sqrt(C / (2 |S| T)); noise is U[0, 1/eta]."""
    return float(np.sqrt(C / (2.0 * num_states * T)))


@dataclass(eq=False)
class FtplState:
    """Cumulative per-state costs plus the perturbation configuration."""

    cumulative_costs: np.ndarray
    eta: float
    bound: float
    rng: np.random.Generator
    noise_enabled: bool = True
    round: int = 1


def ftpl_init(num_states: int, C: float, T: int, *, seed: int | None = None,
              noise_enabled: bool = True) -> FtplState:
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if C <= 0:
        raise ConfigurationError("budget C must be positive")
    return FtplState(
        cumulative_costs=np.zeros(num_states),
        eta=ftpl_noise_scale(C, num_states, T),
        bound=C,
        rng=np.random.default_rng(seed),
        noise_enabled=noise_enabled,
    )


def ftpl_step(state: FtplState, groups: GroupSet, observed: tuple[int, float]):
    """One round: pick the group with the smallest perturbed accumulated cost,
    then record the newly observed per-state cost.

    `observed` is (state index, cost in [0, 1]); selection only sees costs
    recorded in strictly earlier rounds.  Returns (group index, weights, state).
    """
    s_t, cost = observed
    if not 0.0 <= cost <= 1.0:
        raise ConfigurationError(f"observed cost {cost!r} outside [0, 1]")
    num_states = len(state.cumulative_costs)
    if not 0 <= int(s_t) < num_states:
        raise ConfigurationError(
            f"observed state {s_t} out of range for {num_states} states")
    member = groups.membership()
    if member.shape[1] != num_states:
        raise ConfigurationError(
            f"groups defined over {member.shape[1]} states, strategy over "
            f"{num_states}")
    perturbed = state.cumulative_costs.copy()
    if state.noise_enabled:
        perturbed += state.rng.uniform(0.0, 1.0 / state.eta, size=num_states)
    g_t = int(np.argmin(member @ perturbed))
    lam = LagrangeWeights.vertex(len(groups), g_t, state.bound)
    state.cumulative_costs[int(s_t)] += cost
    state.round += 1
    return g_t, lam, state


# ---------------------------------------------------------------------------
# Contextual follow-the-perturbed-leader (separator-based)
# ---------------------------------------------------------------------------

def ctx_ftpl_noise_scale(num_groups: float, d: int, T: int) -> float:
    """Laplace scale rho = sqrt(ln |G| / (T sqrt(d)))."""
    return float(np.sqrt(np.log(num_groups) / (T * np.sqrt(d))))


@dataclass(eq=False)
class CtxFtplState:
    """History of (context, cost) pairs with separator-noise configuration.

    `cumulative_group_costs` caches the per-group sum over the history so a
    round costs O(|G| d) instead of replaying the whole history.  The clipped
    -violation step reuses the same state, accumulating per-group cost
    vectors instead of context observations.
    """

    separator_membership: np.ndarray   # (G, d) bits of each group on separator points
    rho: float
    bound: float
    rng: np.random.Generator
    noise_enabled: bool = True
    round: int = 1
    contexts: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    cumulative_group_costs: np.ndarray | None = None
    realized_costs: list = field(default_factory=list)

    def __post_init__(self):
        if self.cumulative_group_costs is None:
            self.cumulative_group_costs = np.zeros(
                self.separator_membership.shape[0])


def ctx_ftpl_init(groups: GroupSet, separator: SeparatorSet, T: int, *,
                  C: float, seed: int | None = None,
                  noise_enabled: bool = True) -> CtxFtplState:
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if C <= 0:
        raise ConfigurationError("budget C must be positive")
    ok, pair = verify_separator(groups, separator)
    if not ok:
        raise ConfigurationError(
            f"separator does not distinguish groups {pair[0]} and {pair[1]}")
    return CtxFtplState(
        separator_membership=groups.eval_contexts(separator.points).astype(float),
        rho=ctx_ftpl_noise_scale(len(groups), len(separator), T),
        bound=C,
        rng=np.random.default_rng(seed),
        noise_enabled=noise_enabled,
    )


def _separator_noise(state: CtxFtplState) -> np.ndarray:
    d = state.separator_membership.shape[1]
    if not state.noise_enabled:
        return np.zeros(len(state.cumulative_group_costs))
    eta = state.rng.laplace(0.0, state.rho, size=d)
    return state.separator_membership @ eta


def ctx_ftpl_step(state: CtxFtplState, groups: GroupSet,
                  observed: tuple[np.ndarray | int, float]):
    """One round: argmin over groups of (accumulated history cost + fresh
    Laplace noise on the separator points), then append the new observation.

    `observed` is (context, cost): the context is a feature vector, or a state
    index resolved through the group set's feature table; the cost is the
    reward seen there, in [0, 1].  Returns (group index, weights, state).
    """
    ctx, y = observed
    if not 0.0 <= y <= 1.0:
        raise ConfigurationError(f"observed cost {y!r} outside [0, 1]")
    if np.isscalar(ctx) or (isinstance(ctx, np.ndarray) and ctx.ndim == 0):
        ctx = groups.state_features(int(ctx))
    ctx = np.asarray(ctx).astype(np.uint8)
    scores = state.cumulative_group_costs + _separator_noise(state)
    g_t = int(np.argmin(scores))
    lam = LagrangeWeights.vertex(len(groups), g_t, state.bound)
    member = groups.eval_contexts(ctx[None, :])[:, 0].astype(float)
    state.cumulative_group_costs += y * member
    state.contexts.append(ctx)
    state.costs.append(float(y))
    state.realized_costs.append(float(y * member[g_t]))
    state.round += 1
    return g_t, lam, state


def ctx_ftpl_err_canc_step(state: CtxFtplState, groups: GroupSet,
                           estimated_costs: np.ndarray):
    """Clipped-violation round: favor the group whose accumulated clipped
    violations (plus separator noise) are largest, then record this round's
    per-group violation estimates.

    `estimated_costs[g]` is the clipped empirical violation of group g under
    the round's mixture; entries must be nonnegative, so per-group
    accumulated cost is nondecreasing over rounds.
    """
    c_t = np.asarray(estimated_costs, dtype=float)
    if c_t.shape != (len(groups),):
        raise ConfigurationError(
            f"expected {len(groups)} per-group costs, got shape {c_t.shape}")
    if np.any(c_t < 0):
        raise ConfigurationError("clipped violation estimates must be >= 0")
    scores = state.cumulative_group_costs + _separator_noise(state)
    g_t = int(np.argmax(scores))
    lam = LagrangeWeights.vertex(len(groups), g_t, state.bound)
    state.cumulative_group_costs += c_t
    state.costs.append(c_t)
    state.realized_costs.append(float(c_t[g_t]))
    state.round += 1
    return g_t, lam, state


# ---------------------------------------------------------------------------
# Clipped violation estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClippedViolationEstimate:
    """Per-group clipped violations plus the raw per-step reward estimates
    behind them (handy for objective bookkeeping)."""

    violations: np.ndarray        # max(alpha/H - mean(y * g), 0) per group
    group_step_means: np.ndarray  # mean of y * g(s) over the samples, per group
    total_step_mean: float        # mean of y over the samples
    num_samples: int


def estimate_clipped_violations(mdp: TabularMDP, mixture: PolicyMixture,
                                groups: GroupSet, alpha: float, n: int,
                                rng_seed: int) -> ClippedViolationEstimate:
    """Sample n (trajectory, uniform step) pairs under the mixture and return
    per-group clipped violations max(alpha/H - mean_i y_i g(s_i), 0)."""
    if n < 1:
        raise ConfigurationError("sample count n must be >= 1")
    if mdp.horizon < 1:
        raise ConfigurationError("clipped violations need horizon >= 1")
    rng = np.random.default_rng(rng_seed)
    states, _, rewards = _rollout_batch(mdp, mixture, n, rng)
    steps = rng.integers(0, mdp.horizon, size=n)
    rows = np.arange(n)
    s_i = states[rows, steps]
    y_i = rewards[rows, steps]
    member = groups.membership()                  # (G, S)
    gated = member[:, s_i] * y_i[None, :]         # (G, n)
    step_means = gated.mean(axis=1)
    target = alpha / mdp.horizon
    return ClippedViolationEstimate(
        violations=np.maximum(target - step_means, 0.0),
        group_step_means=step_means,
        total_step_mean=float(y_i.mean()),
        num_samples=n,
    )
