"""Solvers for episodic tabular MDPs with per-group reward floors.

States carry boolean feature annotations; groups are {0,1}-valued functions
of those features, possibly intersecting.  The library computes distributions
over policies that maximize total expected reward subject to every group's
expected reward meeting a floor, via zero-sum game dynamics between an exact
planning learner and a no-regret or best-responding regulator.
"""
from .envs import BaGraphSpec, Graph, generate_ba_graph, graph_to_mdp, \
    random_tabular_mdp
from .errors import ConfigurationError
from .game import (AlphaSearchResult, GameTranscript, RoundRecord,
                   SolverConfig, equilibrium_check, fairfict_err_canc,
                   fairfict_rl, lagrangian_L, morl_brnr, objective_U,
                   regulator_regret, solve_minimax_alpha)
from .groups import (GroupFunction, GroupSet, SeparatorSet, all_conjunctions,
                     conjunction_class_argmin, conjunction_separator,
                     evaluate, lin_opt, opt_seq, verify_separator)
from .mdp import (MonteCarloValues, Policy, PolicyMixture, ScalarizedReward,
                  TabularMDP, Trajectory, best_response_policy, exact_values,
                  mixture_values, monte_carlo_group_values,
                  occupancy_distribution, sample_trajectory, scalarize,
                  shannon_entropy, value_iteration)
from .regulator import (ClippedViolationEstimate, CtxFtplState, FtplState,
                        LagrangeWeights, best_response_lambda, ctx_ftpl_init,
                        ctx_ftpl_noise_scale, ctx_ftpl_step,
                        ctx_ftpl_err_canc_step, estimate_clipped_violations,
                        ftpl_init, ftpl_noise_scale, ftpl_step)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
