"""Zero-sum game drivers pairing a planning learner against a regulator.

The learner maximizes the budget-weighted objective

    U(D, lam) = (1/H) * [V_tot(D) + sum_g lam[g] * (V_g(D) - alpha)]

over policy mixtures; the regulator minimizes it over nonnegative weights
with l1 norm at most C.  Three drivers return full transcripts:

* `morl_brnr` — learner best-responds each round while the regulator runs a
  no-regret strategy (tabular or contextual follow-the-perturbed-leader);
* `fairfict_rl` — fictitious play: each side best-responds to the other's
  historical average;
* `fairfict_err_canc` — fictitious play against clipped constraint
  violations, so per-policy slack cannot cancel per-policy violation.

`equilibrium_check` and `regulator_regret` audit results exactly via dynamic
programming, and `solve_minimax_alpha` searches for the largest enforceable
per-group floor by bisection.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .groups import GroupSet
from .mdp import (Policy, PolicyMixture, TabularMDP, _rollout_batch,
                  best_response_policy, exact_values, mixture_values,
                  monte_carlo_group_values, scalarize, value_iteration)
from .regulator import (LagrangeWeights, best_response_lambda, ctx_ftpl_init,
                        ctx_ftpl_step, estimate_clipped_violations, ftpl_init,
                        ftpl_step)

REGULATOR_KINDS = ("ftpl", "ctx_ftpl")


@dataclass
class SolverConfig:
    """Run parameters shared by the game drivers.

    `alpha` is the cumulative per-group floor; the per-step floor is
    alpha / H.  `eval_episodes` is the Monte-Carlo sample size used for the
    regulator's feedback unless `exact_eval` is set.  `violation_samples` is
    the per-round sample count for clipped-violation estimation.
    """

    alpha: float
    C: float
    T: int
    epsilon: float = 0.0
    eval_episodes: int = 500
    exact_eval: bool = False
    error_cancellation: bool = False
    violation_samples: int = 500
    seed: int = 0
    noise_enabled: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("alpha must be >= 0")
        if self.C <= 0:
            raise ConfigurationError("C must be > 0")
        if self.T < 1:
            raise ConfigurationError("T must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigurationError("eval_episodes must be >= 1")
        if self.error_cancellation and self.violation_samples < 1:
            raise ConfigurationError(
                "violation_samples must be >= 1 when error cancellation is on")


@dataclass
class RoundRecord:
    """Per-round bookkeeping.

    `est_group_step` holds the per-step group estimates the regulator acted
    on this round (values of the pre-round average mixture); `mixture_*` hold
    exact per-step values of the post-round average mixture.
    """

    t: int
    lam: np.ndarray
    lam_avg: np.ndarray
    policy_id: int
    objective: float
    policy_total: float
    policy_group: np.ndarray
    mixture_total_step: float
    mixture_group_step: np.ndarray
    est_total_step: float | None = None
    est_group_step: np.ndarray | None = None
    est_violations: np.ndarray | None = None


@dataclass
class GameTranscript:
    algorithm: str
    config: SolverConfig
    num_groups: int
    records: list[RoundRecord]
    policies: list[Policy]
    final_mixture: PolicyMixture
    final_lambda: LagrangeWeights
    initial_policy: Policy | None = None

    def __len__(self) -> int:
        return len(self.records)

    def lambda_history(self) -> np.ndarray:
        return np.stack([r.lam for r in self.records])


class _MixtureTracker:
    """Uniform running average over round policies with exact-value caching."""

    def __init__(self, mdp: TabularMDP, groups: GroupSet):
        self.mdp = mdp
        self.groups = groups
        self.policies: list[Policy] = []
        self._ids: dict[bytes, int] = {}
        self._values: list[tuple[float, np.ndarray]] = []
        self.round_ids: list[int] = []
        self._sum_total = 0.0
        self._sum_group = np.zeros(len(groups))

    def policy_values(self, policy: Policy) -> tuple[int, float, np.ndarray]:
        key = policy.key()
        pid = self._ids.get(key)
        if pid is None:
            pid = len(self.policies)
            self._ids[key] = pid
            self.policies.append(policy)
            self._values.append(exact_values(self.mdp, policy, self.groups))
        total, group = self._values[pid]
        return pid, total, group

    def add_round(self, policy: Policy) -> tuple[int, float, np.ndarray]:
        pid, total, group = self.policy_values(policy)
        self.round_ids.append(pid)
        self._sum_total += total
        self._sum_group = self._sum_group + group
        return pid, total, group

    @property
    def rounds(self) -> int:
        return len(self.round_ids)

    def mixture(self) -> PolicyMixture:
        counts = np.bincount(self.round_ids, minlength=len(self.policies))
        keep = counts > 0
        return PolicyMixture(
            tuple(p for p, k in zip(self.policies, keep) if k),
            counts[keep] / counts.sum())

    def exact_average(self) -> tuple[float, np.ndarray]:
        n = self.rounds
        return self._sum_total / n, self._sum_group / n


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def _lam_array(lam, num_groups: int) -> np.ndarray:
    v = np.asarray(getattr(lam, "values", lam), dtype=float)
    if v.shape != (num_groups,):
        raise ConfigurationError(
            f"lambda shape {v.shape} != ({num_groups},)")
    return v


def objective_U(mdp: TabularMDP, groups: GroupSet, mixture: PolicyMixture,
                lam, alpha: float) -> float:
    """Per-step-average saddle objective, from exact mixture values."""
    lam_v = _lam_array(lam, len(groups))
    total, group = mixture_values(mdp, mixture, groups)
    return (total + lam_v @ (group - alpha)) / mdp.horizon


def lagrangian_L(mdp: TabularMDP, groups: GroupSet, mixture: PolicyMixture,
                 lam, alpha: float, per_policy: bool = False) -> float:
    """Clipped objective f(D) - sum_g lam[g] * max(violation_g, 0).

    With `per_policy=False` the violation alpha/H - V_g/H is computed for the
    mixture as a whole; with `per_policy=True` the clipping happens inside
    the mixture expectation, so slack on one support policy can no longer
    cancel violation on another.
    """
    lam_v = _lam_array(lam, len(groups))
    H = mdp.horizon
    total, group = mixture_values(mdp, mixture, groups)
    f = total / H
    if not per_policy:
        violation = np.maximum(alpha / H - group / H, 0.0)
        return f - float(lam_v @ violation)
    clipped = np.zeros(len(groups))
    for w, pol in zip(mixture.weights, mixture.policies):
        _, g = exact_values(mdp, pol, groups)
        clipped += w * np.maximum(alpha / H - g / H, 0.0)
    return f - float(lam_v @ clipped)


def _exact_u(total: float, group: np.ndarray, lam_v: np.ndarray,
             alpha: float, H: int) -> float:
    return (total + lam_v @ (group - alpha)) / H


def _round_seeds(seed: int, stream: int, T: int) -> np.ndarray:
    return np.random.SeedSequence([seed, stream]).generate_state(T)


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def _require_positive_horizon(mdp: TabularMDP):
    if mdp.horizon < 1:
        raise ConfigurationError("game drivers need horizon >= 1")


def morl_brnr(mdp: TabularMDP, groups: GroupSet, config: SolverConfig,
              regulator_kind: str = "ftpl") -> GameTranscript:
    """Learner best response vs. no-regret regulator.

    Each round the learner plans exactly against the regulator's latest
    weights; the regulator advances one perturbed-leader step on a single
    (state, reward) observation sampled from the learner's policy at a
    uniformly chosen step.  Returns the full transcript with the uniform
    averages of both players' iterates.
    """
    _require_positive_horizon(mdp)
    if regulator_kind not in REGULATOR_KINDS:
        raise ConfigurationError(
            f"regulator_kind must be one of {REGULATOR_KINDS}")
    if regulator_kind == "ctx_ftpl" and groups.separator is None:
        raise ConfigurationError(
            "contextual strategy needs a group set with a verified separator")

    reg_seed = int(_round_seeds(config.seed, 0, 1)[0])
    traj_seeds = _round_seeds(config.seed, 1, config.T)
    if regulator_kind == "ftpl":
        reg_state = ftpl_init(mdp.num_states, config.C, config.T,
                              seed=reg_seed, noise_enabled=config.noise_enabled)
    else:
        reg_state = ctx_ftpl_init(groups, groups.separator, config.T,
                                  C=config.C, seed=reg_seed,
                                  noise_enabled=config.noise_enabled)

    tracker = _MixtureTracker(mdp, groups)
    br_cache: dict[bytes, Policy] = {}
    lam_prev = np.zeros(len(groups))
    lam_sum = np.zeros(len(groups))
    records: list[RoundRecord] = []
    H = mdp.horizon

    for t in range(1, config.T + 1):
        key = lam_prev.tobytes()
        policy = br_cache.get(key)
        if policy is None:
            policy = best_response_policy(mdp, groups, lam_prev, config.alpha)
            br_cache[key] = policy
        pid, p_total, p_group = tracker.add_round(policy)

        rng = np.random.default_rng(int(traj_seeds[t - 1]))
        states, _, rewards = _rollout_batch(
            mdp, PolicyMixture.point_mass(policy), 1, rng)
        h = int(rng.integers(H))
        s_h, r_h = int(states[0, h]), float(rewards[0, h])

        if regulator_kind == "ftpl":
            _, lam_t, reg_state = ftpl_step(reg_state, groups, (s_h, r_h))
        else:
            _, lam_t, reg_state = ctx_ftpl_step(
                reg_state, groups, (groups.state_features(s_h), r_h))

        lam_sum += lam_t.values
        mix_total, mix_group = tracker.exact_average()
        records.append(RoundRecord(
            t=t, lam=lam_t.values.copy(), lam_avg=lam_sum / t, policy_id=pid,
            objective=_exact_u(p_total, p_group, lam_t.values, config.alpha, H),
            policy_total=p_total, policy_group=p_group,
            mixture_total_step=mix_total / H, mixture_group_step=mix_group / H))
        lam_prev = lam_t.values

    return GameTranscript(
        algorithm=f"morl-{regulator_kind.replace('_', '-')}",
        config=config, num_groups=len(groups), records=records,
        policies=tracker.policies, final_mixture=tracker.mixture(),
        final_lambda=LagrangeWeights(lam_sum / config.T, config.C))


def _fairfict_common(mdp: TabularMDP, groups: GroupSet, config: SolverConfig,
                     error_cancellation: bool) -> GameTranscript:
    _require_positive_horizon(mdp)
    H = mdp.horizon
    initial = Policy.uniform(H, mdp.num_states, mdp.num_actions)
    tracker = _MixtureTracker(mdp, groups)
    eval_seeds = _round_seeds(config.seed, 2, config.T)
    member = groups.membership().astype(float)
    lam_sum = np.zeros(len(groups))
    lam_avg = np.zeros(len(groups))
    records: list[RoundRecord] = []

    init_total, init_group = exact_values(mdp, initial, groups)

    for t in range(1, config.T + 1):
        prev_mixture = (PolicyMixture.point_mass(initial) if t == 1
                        else tracker.mixture())
        est_violations = None
        if error_cancellation:
            est = estimate_clipped_violations(
                mdp, prev_mixture, groups, config.alpha,
                config.violation_samples, int(eval_seeds[t - 1]))
            est_violations = est.violations
            est_group_step = est.group_step_means
            est_total_step = est.total_step_mean
            if np.any(est.violations > 0):
                lam_t = LagrangeWeights.vertex(
                    len(groups), int(np.argmax(est.violations)), config.C)
            else:
                lam_t = LagrangeWeights.zero(len(groups), config.C)
            # Plan against the groups currently in violation: reweight the
            # reward by the average weights restricted to the active set.
            active = (est.violations > 0).astype(float)
            state_weight = 1.0 + (lam_avg * active) @ member
            table = mdp.rewards * state_weight[:, None]
            policy, _ = value_iteration(mdp, table)
        else:
            if config.exact_eval:
                if t == 1:
                    va_total, va_group = init_total, init_group
                else:
                    va_total, va_group = tracker.exact_average()
            else:
                mc = monte_carlo_group_values(
                    mdp, prev_mixture, groups, config.eval_episodes,
                    int(eval_seeds[t - 1]))
                va_total, va_group = mc.total_mean, mc.group_means
            est_group_step = va_group / H
            est_total_step = va_total / H
            lam_t = best_response_lambda(va_group, config.alpha, config.C)
            policy = best_response_policy(mdp, groups, lam_avg, config.alpha)

        pid, p_total, p_group = tracker.add_round(policy)
        lam_sum += lam_t.values
        lam_avg = lam_sum / t
        mix_total, mix_group = tracker.exact_average()
        if error_cancellation:
            clipped = np.maximum(config.alpha / H - p_group / H, 0.0)
            objective = p_total / H - float(lam_t.values @ clipped)
        else:
            objective = _exact_u(p_total, p_group, lam_t.values, config.alpha, H)
        records.append(RoundRecord(
            t=t, lam=lam_t.values.copy(), lam_avg=lam_avg.copy(), policy_id=pid,
            objective=objective, policy_total=p_total, policy_group=p_group,
            mixture_total_step=mix_total / H, mixture_group_step=mix_group / H,
            est_total_step=est_total_step, est_group_step=est_group_step,
            est_violations=est_violations))

    return GameTranscript(
        algorithm="fairfict-ec" if error_cancellation else "fairfict",
        config=config, num_groups=len(groups), records=records,
        policies=tracker.policies, final_mixture=tracker.mixture(),
        final_lambda=LagrangeWeights(lam_avg, config.C),
        initial_policy=initial)


def fairfict_rl(mdp: TabularMDP, groups: GroupSet,
                config: SolverConfig) -> GameTranscript:
    """Fictitious play: each round the learner plans against the average
    weights so far while the regulator best-responds to the average policy
    mixture, evaluated by seeded rollouts (or exactly when configured)."""
    return _fairfict_common(mdp, groups, config, error_cancellation=False)


def fairfict_err_canc(mdp: TabularMDP, groups: GroupSet,
                      config: SolverConfig) -> GameTranscript:
    """Fictitious play on the clipped objective: the regulator reacts to
    estimated violations clipped at zero, and the learner plans with the
    average weights restricted to the currently violated groups."""
    if not config.error_cancellation:
        raise ConfigurationError(
            "enable error_cancellation in the config for this driver")
    return _fairfict_common(mdp, groups, config, error_cancellation=True)


# ---------------------------------------------------------------------------
# Auditing
# ---------------------------------------------------------------------------

def equilibrium_check(mdp: TabularMDP, groups: GroupSet,
                      mixture: PolicyMixture, lam, alpha: float, C: float):
    """Exact one-sided improvement gaps at (mixture, lam).

    The regulator's gap compares against the best vertex of the weight set
    (the linear objective attains its minimum at a vertex); the learner's gap
    compares against the exact planner on the reweighted MDP.  Returns
    (gap_learner, gap_regulator, nu = max of the two).
    """
    _require_positive_horizon(mdp)
    lam_v = _lam_array(lam, len(groups))
    H = mdp.horizon
    total, group = mixture_values(mdp, mixture, groups)
    u_pair = _exact_u(total, group, lam_v, alpha, H)
    u_min = total / H + C * min(0.0, float((group - alpha).min()) / H)
    scal = scalarize(mdp, groups, lam_v, alpha)
    _, v_opt = value_iteration(mdp, scal.table)
    gap_regulator = u_pair - u_min
    gap_learner = v_opt / H - u_pair
    return gap_learner, gap_regulator, max(gap_learner, gap_regulator)


def regulator_regret(transcript: GameTranscript, mdp: TabularMDP,
                     groups: GroupSet, alpha: float, C: float) -> float:
    """Realized regulator regret over the transcript, via exact evaluation:
    sum_t U(D_t, lam_t) minus the best fixed weight vector in hindsight."""
    _require_positive_horizon(mdp)
    H = mdp.horizon
    cache: dict[int, tuple[float, np.ndarray]] = {}
    realized = 0.0
    base = 0.0
    cum_slack = np.zeros(transcript.num_groups)
    for rec in transcript.records:
        if rec.policy_id not in cache:
            cache[rec.policy_id] = exact_values(
                mdp, transcript.policies[rec.policy_id], groups)
        total, group = cache[rec.policy_id]
        realized += _exact_u(total, group, rec.lam, alpha, H)
        base += total / H
        cum_slack += (group - alpha) / H
    best_fixed = base + C * min(0.0, float(cum_slack.min()))
    return realized - best_fixed


@dataclass
class AlphaSearchResult:
    alpha_star: float
    transcript: GameTranscript
    evaluations: list = field(default_factory=list)  # (alpha, certified min value)
    diagnostics: list = field(default_factory=list)


def solve_minimax_alpha(mdp: TabularMDP, groups: GroupSet,
                        config: SolverConfig, tolerance: float) -> AlphaSearchResult:
    """Bisection for the largest enforceable cumulative floor.

    A level alpha counts as feasible when the returned mixture certifies
    min_g V_g >= alpha - tolerance under exact evaluation.  If a level fails
    while a higher certificate already covers it (a non-monotone reading,
    possible under Monte-Carlo feedback), the run is retried once with four
    times the evaluation episodes and the event is recorded.
    """
    _require_positive_horizon(mdp)
    if tolerance <= 0:
        raise ConfigurationError("tolerance must be > 0")

    driver = fairfict_err_canc if config.error_cancellation else fairfict_rl

    def run(alpha: float, episodes: int, attempt: int):
        cfg = SolverConfig(
            alpha=alpha, C=config.C, T=config.T, epsilon=config.epsilon,
            eval_episodes=episodes, exact_eval=config.exact_eval,
            error_cancellation=config.error_cancellation,
            violation_samples=config.violation_samples,
            seed=config.seed + attempt, noise_enabled=config.noise_enabled)
        transcript = driver(mdp, groups, cfg)
        _, group = mixture_values(mdp, transcript.final_mixture, groups)
        return transcript, float(group.min())

    result = AlphaSearchResult(alpha_star=0.0, transcript=None)
    best_certified = -np.inf

    def evaluate(alpha: float) -> bool:
        nonlocal best_certified
        transcript, certified = run(alpha, config.eval_episodes, 0)
        feasible = certified >= alpha - tolerance
        if not feasible and best_certified >= alpha - tolerance:
            result.diagnostics.append(
                f"non-monotone feasibility at alpha={alpha:.6g} "
                f"(certified {certified:.6g} below an earlier certificate "
                f"{best_certified:.6g}); retrying with wider evaluation")
            transcript, certified = run(alpha, 4 * config.eval_episodes, 1)
            feasible = certified >= alpha - tolerance
        result.evaluations.append((alpha, certified))
        if feasible and certified > best_certified:
            best_certified = certified
        if feasible:
            result.alpha_star = alpha
            result.transcript = transcript
        return feasible

    lo, hi = 0.0, float(mdp.horizon)
    if not evaluate(lo):  # alpha = 0 is always feasible; keep its transcript
        raise ConfigurationError("solver failed the trivially feasible level 0")
    if evaluate(hi):
        return result
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if evaluate(mid):
            lo = mid
        else:
            hi = mid
    return result
