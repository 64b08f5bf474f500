"""Command-line interface.

Subcommands:
    generate ba | random   write MDP / group / graph files for an environment
    solve                  run a game driver, emit transcript + CSVs
    pareto                 sweep the per-step floor over a grid, emit CSV
    check                  exact equilibrium-gap and regret report

Every command is deterministic given its full flag set (seeds included).
Flags may also be supplied through a JSON file via --config; explicit flags
take precedence.  The output directory may be overridden with the
FAIRMDP_OUTPUT_DIR environment variable.  Exit codes: 0 success, 1 validation
error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .envs import BaGraphSpec, generate_ba_graph, graph_to_mdp, \
    random_tabular_mdp
from .errors import ConfigurationError
from .game import (SolverConfig, equilibrium_check, fairfict_err_canc,
                   fairfict_rl, morl_brnr, regulator_regret)
from .groups import conjunction_separator, verify_separator
from .mdp import (PolicyMixture, best_response_policy, mixture_values,
                  occupancy_distribution, shannon_entropy, value_iteration)

ALGORITHMS = ("fairfict", "fairfict-ec", "morl-ftpl", "morl-ctx-ftpl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # flag mistakes are validation errors: exit 1
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairmdp", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write environment files",
                         parser_class=_Parser)
    gen_kind = gen.add_subparsers(dest="kind", required=True)
    ba = gen_kind.add_parser("ba", help="preferential-attachment graph MDP",
                             parser_class=_Parser)
    ba.add_argument("--nodes", type=int, required=True)
    ba.add_argument("--ne", type=int, required=True,
                    help="edges attached by each new node")
    ba.add_argument("--horizon", type=int, default=20)
    ba.add_argument("--seed", type=int, default=0)
    ba.add_argument("--out", type=str, default=None)
    rnd = gen_kind.add_parser("random", help="random tabular MDP",
                              parser_class=_Parser)
    rnd.add_argument("--states", type=int, required=True)
    rnd.add_argument("--actions", type=int, required=True)
    rnd.add_argument("--horizon", type=int, required=True)
    rnd.add_argument("--groups", type=int, required=True)
    rnd.add_argument("--feature-dim", type=int, default=4)
    rnd.add_argument("--seed", type=int, default=0)
    rnd.add_argument("--out", type=str, default=None)

    solve = sub.add_parser("solve", help="run one game driver",
                           parser_class=_Parser)
    _add_solver_flags(solve)

    pareto = sub.add_parser("pareto", help="sweep the per-step floor",
                            parser_class=_Parser)
    _add_solver_flags(pareto, pareto_grid=True)

    check = sub.add_parser("check", help="equilibrium and regret report",
                           parser_class=_Parser)
    check.add_argument("--env", type=str, required=True)
    check.add_argument("--transcript", type=str, required=True)
    check.add_argument("--out", type=str, default=None)
    return parser


def _add_solver_flags(p: argparse.ArgumentParser, pareto_grid: bool = False):
    p.add_argument("--env", type=str, default=None,
                   help="environment directory or mdp.json path")
    p.add_argument("--alg", type=str, default=None, choices=ALGORITHMS)
    if pareto_grid:
        p.add_argument("--alpha-grid", type=str, default=None,
                       help="comma-separated ascending per-step floors")
    else:
        p.add_argument("--alpha-per-step", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=None)
    p.add_argument("--ec-samples", type=int, default=None,
                   help="per-round samples for clipped-violation estimation")
    p.add_argument("--exact-eval", action="store_true", default=None)
    p.add_argument("--no-noise", action="store_true", default=None,
                   help="disable the regulator's perturbations")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--occupancy-episodes", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--config", type=str, default=None,
                   help="JSON file of flag defaults; explicit flags win")


_SOLVE_DEFAULTS = {
    "alg": "fairfict",
    "alpha_per_step": 0.0,
    "alpha_grid": "0,0.02,0.04,0.06,0.08,0.1",
    "C": 25.0,
    "T": 200,
    "eval_episodes": 500,
    "ec_samples": 500,
    "exact_eval": False,
    "no_noise": False,
    "seed": 0,
    "occupancy_episodes": 2000,
}


def _merge_config(args: argparse.Namespace):
    file_values = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        if not isinstance(doc, dict):
            raise ConfigurationError(f"{args.config}: config must be an object")
        file_values = {k.replace("-", "_"): v for k, v in doc.items()}
    for key, default in {**_SOLVE_DEFAULTS, **file_values}.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, file_values.get(key, default))


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("FAIRMDP_OUTPUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_env(env: str | None):
    if env is None:
        raise ConfigurationError("--env is required")
    env_path = Path(env)
    if env_path.is_dir():
        mdp_path, group_path = env_path / "mdp.json", env_path / "groups.json"
    else:
        mdp_path, group_path = env_path, env_path.parent / "groups.json"
    if not mdp_path.exists():
        raise ConfigurationError(f"{mdp_path}: no such file")
    if not group_path.exists():
        raise ConfigurationError(f"{group_path}: no such file")
    mdp = io.load_mdp(mdp_path)
    groups = io.load_groups(group_path, features=mdp.features)
    return mdp, groups


def _attach_separator(groups):
    if any(not g.is_conjunction for g in groups):
        raise ConfigurationError(
            "the contextual strategy needs conjunction groups")
    sep = conjunction_separator(groups.features.shape[1])
    ok, pair = verify_separator(groups, sep)
    if not ok:
        raise ConfigurationError(
            f"groups {pair[0]} and {pair[1]} are identical on the separator; "
            f"the contextual strategy cannot distinguish them")
    from .groups import GroupSet
    return GroupSet(groups.functions, features=groups.features, separator=sep)


def _run_driver(mdp, groups, alg: str, cfg: SolverConfig):
    if alg == "fairfict":
        return fairfict_rl(mdp, groups, cfg)
    if alg == "fairfict-ec":
        return fairfict_err_canc(mdp, groups, cfg)
    if alg == "morl-ftpl":
        return morl_brnr(mdp, groups, cfg, regulator_kind="ftpl")
    if alg == "morl-ctx-ftpl":
        return morl_brnr(mdp, groups, cfg, regulator_kind="ctx_ftpl")
    raise ConfigurationError(f"unknown algorithm {alg!r}")


def _solver_config(args, alpha_per_step: float, horizon: int) -> SolverConfig:
    return SolverConfig(
        alpha=alpha_per_step * horizon,
        C=args.C, T=args.T,
        eval_episodes=args.eval_episodes,
        exact_eval=bool(args.exact_eval),
        error_cancellation=(args.alg == "fairfict-ec"),
        violation_samples=args.ec_samples,
        seed=args.seed,
        noise_enabled=not args.no_noise)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    out = _out_dir(args)
    if args.kind == "ba":
        spec = BaGraphSpec(num_nodes=args.nodes, edges_per_new_node=args.ne,
                           horizon=args.horizon, rng_seed=args.seed)
        graph = generate_ba_graph(spec)
        mdp, groups = graph_to_mdp(graph, args.horizon)
        io.save_graph(graph, out / "graph.json")
    else:
        mdp, groups = random_tabular_mdp(
            args.states, args.actions, args.horizon, args.groups,
            args.seed, feature_dim=args.feature_dim)
    io.save_mdp(mdp, out / "mdp.json")
    io.save_groups(groups, out / "groups.json")
    print(f"wrote environment files to {out}")
    return 0


def cmd_solve(args) -> int:
    _merge_config(args)
    mdp, groups = _load_env(args.env)
    if args.alg == "morl-ctx-ftpl":
        groups = _attach_separator(groups)
    cfg = _solver_config(args, args.alpha_per_step, mdp.horizon)
    transcript = _run_driver(mdp, groups, args.alg, cfg)
    out = _out_dir(args)
    io.write_transcript(transcript, out / "transcript.jsonl")
    io.write_group_rewards_csv(transcript, out / "group_rewards.csv")

    unconstrained = best_response_policy(mdp, groups, np.zeros(len(groups)), 0.0)
    occ_seed = int(np.random.SeedSequence([cfg.seed, 3]).generate_state(1)[0])
    occ_fair = occupancy_distribution(mdp, transcript.final_mixture,
                                      args.occupancy_episodes, occ_seed)
    occ_opt = occupancy_distribution(
        mdp, PolicyMixture.point_mass(unconstrained),
        args.occupancy_episodes, occ_seed + 1)
    io.write_occupancy_csv(occ_fair, occ_opt, out / "occupancy.csv")

    total, group = mixture_values(mdp, transcript.final_mixture, groups)
    H = mdp.horizon
    print(f"algorithm={transcript.algorithm} T={cfg.T} "
          f"alpha_per_step={cfg.alpha / H:.6g}")
    print(f"final total avg reward: {total / H:.6g}")
    for g in range(len(groups)):
        print(f"final group {g} avg reward: {group[g] / H:.6g}")
    print(f"occupancy entropy fair={shannon_entropy(occ_fair):.6g} "
          f"unconstrained={shannon_entropy(occ_opt):.6g}")
    print(f"wrote transcript.jsonl, group_rewards.csv, occupancy.csv to {out}")
    return 0


def cmd_pareto(args) -> int:
    _merge_config(args)
    mdp, groups = _load_env(args.env)
    if args.alg == "morl-ctx-ftpl":
        groups = _attach_separator(groups)
    grid = [float(x) for x in str(args.alpha_grid).split(",") if x != ""]
    if not grid or any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("--alpha-grid must be nonempty and ascending")
    H = mdp.horizon
    rows = []
    for i, a in enumerate(grid):
        try:
            cfg = _solver_config(args, a, H)
            cfg.seed = args.seed + i
            transcript = _run_driver(mdp, groups, args.alg, cfg)
            total, group = mixture_values(mdp, transcript.final_mixture, groups)
            rows.append({
                "alpha_per_step": a, "status": "ok",
                "total_step_avg": total / H,
                "group_spread": float(group.max() - group.min()) / H,
                "groups": (group / H).tolist()})
        except Exception as exc:  # keep sweeping; record the failure per row
            rows.append({"alpha_per_step": a, "status": f"error: {exc}"})
    out = _out_dir(args)
    io.write_pareto_csv(rows, len(groups), out / "pareto.csv")
    for row in rows:
        if row["status"] == "ok":
            print(f"alpha/H={row['alpha_per_step']:.4g} "
                  f"total={row['total_step_avg']:.4g} "
                  f"spread={row['group_spread']:.4g}")
        else:
            print(f"alpha/H={row['alpha_per_step']:.4g} {row['status']}")
    print(f"wrote pareto.csv to {out}")
    return 0


def cmd_check(args) -> int:
    mdp, groups = _load_env(args.env)
    transcript = io.read_transcript(args.transcript)
    if transcript.num_groups != len(groups):
        raise ConfigurationError(
            f"transcript has {transcript.num_groups} groups but the "
            f"environment defines {len(groups)}")
    if transcript.policies[0].num_states != mdp.num_states:
        raise ConfigurationError("transcript policies do not match the MDP")
    cfg = transcript.config
    gap_learner, gap_regulator, nu = equilibrium_check(
        mdp, groups, transcript.final_mixture, transcript.final_lambda,
        cfg.alpha, cfg.C)
    regret = regulator_regret(transcript, mdp, groups, cfg.alpha, cfg.C)
    total, group = mixture_values(mdp, transcript.final_mixture, groups)
    H = mdp.horizon
    report = {
        "gap_learner": gap_learner,
        "gap_regulator": gap_regulator,
        "nu": nu,
        "regulator_regret": regret,
        "regulator_regret_per_round": regret / len(transcript.records),
        "total_avg": total / H,
        "group_avg": (group / H).tolist(),
        "alpha_per_step": cfg.alpha / H,
    }
    out = _out_dir(args)
    (out / "check.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"gap_learner={gap_learner:.6g} gap_regulator={gap_regulator:.6g} "
          f"nu={nu:.6g}")
    print(f"regulator regret={regret:.6g} "
          f"({report['regulator_regret_per_round']:.6g} per round)")
    for g, v in enumerate(report["group_avg"]):
        print(f"group {g} avg reward: {v:.6g}")
    print(f"wrote check.json to {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"generate": cmd_generate, "solve": cmd_solve,
                "pareto": cmd_pareto, "check": cmd_check}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and signal runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
