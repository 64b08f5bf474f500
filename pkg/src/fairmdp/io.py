"""File formats: MDP / group / graph JSON, transcript JSON-lines, and CSVs.

All writers produce deterministic bytes for identical inputs (sorted keys,
fixed separators, no timestamps), so regenerating an environment from the
same spec and seed reproduces the files exactly.  JSON schemas for each
format live in the repository's `schemas/` directory.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .envs import Graph
from .errors import ConfigurationError
from .game import GameTranscript, RoundRecord, SolverConfig
from .groups import GroupFunction, GroupSet
from .mdp import Policy, PolicyMixture, TabularMDP
from .regulator import LagrangeWeights


def _dump(obj, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# MDP files
# ---------------------------------------------------------------------------

def save_mdp(mdp: TabularMDP, path) -> None:
    _dump({
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "horizon": mdp.horizon,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
        "initial_dist": mdp.initial_dist.tolist(),
        "features": mdp.features.tolist(),
    }, path)


def load_mdp(path) -> TabularMDP:
    doc = _load(path)
    required = ("num_states", "num_actions", "horizon", "transitions",
                "rewards", "initial_dist", "features")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ConfigurationError(f"{path}: missing fields {missing}")
    features = doc["features"]
    if features and len({len(row) for row in features}) > 1:
        raise ConfigurationError(
            f"{path}: feature rows have mixed dimensions")
    return TabularMDP(
        num_states=doc["num_states"], num_actions=doc["num_actions"],
        horizon=doc["horizon"], transitions=np.array(doc["transitions"]),
        rewards=np.array(doc["rewards"]),
        initial_dist=np.array(doc["initial_dist"]),
        features=np.array(features))


# ---------------------------------------------------------------------------
# Group files
# ---------------------------------------------------------------------------

def save_groups(groups: GroupSet, path) -> None:
    entries = []
    for g in groups:
        if g.is_conjunction:
            entries.append({"conjunction": list(g.conjunction)})
        else:
            entries.append({"explicit": g.explicit.tolist()})
    _dump(entries, path)


def load_groups(path, features: np.ndarray | None = None,
                separator=None) -> GroupSet:
    doc = _load(path)
    if not isinstance(doc, list) or not doc:
        raise ConfigurationError(f"{path}: expected a nonempty list of groups")
    functions = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or len(entry) != 1:
            raise ConfigurationError(
                f"{path}: group {i} must be an object with exactly one of "
                f"'explicit' or 'conjunction'")
        if "explicit" in entry:
            functions.append(GroupFunction.from_bits(entry["explicit"]))
        elif "conjunction" in entry:
            functions.append(GroupFunction.from_conjunction(entry["conjunction"]))
        else:
            raise ConfigurationError(
                f"{path}: group {i} has unknown key {list(entry)[0]!r}")
    return GroupSet(tuple(functions), features=features, separator=separator)


# ---------------------------------------------------------------------------
# Graph files
# ---------------------------------------------------------------------------

def save_graph(graph: Graph, path) -> None:
    _dump({
        "num_nodes": graph.num_nodes,
        "edges": [list(e) for e in graph.edges],
    }, path)


def load_graph(path) -> Graph:
    doc = _load(path)
    for key in ("num_nodes", "edges"):
        if key not in doc:
            raise ConfigurationError(f"{path}: missing field {key!r}")
    return Graph(num_nodes=doc["num_nodes"],
                 edges=tuple(tuple(e) for e in doc["edges"]))


# ---------------------------------------------------------------------------
# Transcripts (JSON lines: one record per round plus a summary record)
# ---------------------------------------------------------------------------

def _opt_list(x):
    return None if x is None else np.asarray(x).tolist()


def _policy_doc(pid: int, policy: Policy) -> dict:
    probs = policy.probs
    if np.isin(probs, (0.0, 1.0)).all():
        return {"id": pid, "actions": probs.argmax(axis=2).tolist()}
    return {"id": pid, "probs": probs.tolist()}


def _policy_from_doc(doc: dict, num_actions: int) -> Policy:
    if "actions" in doc:
        return Policy.deterministic(np.array(doc["actions"]), num_actions)
    return Policy(np.array(doc["probs"]))


def write_transcript(transcript: GameTranscript, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in transcript.records:
        lines.append(json.dumps({
            "record": "round",
            "t": rec.t,
            "lambda": rec.lam.tolist(),
            "lambda_avg": rec.lam_avg.tolist(),
            "policy_id": rec.policy_id,
            "objective": rec.objective,
            "policy_total": rec.policy_total,
            "policy_group": rec.policy_group.tolist(),
            "mixture_total_step": rec.mixture_total_step,
            "mixture_group_step": rec.mixture_group_step.tolist(),
            "est_total_step": rec.est_total_step,
            "est_group_step": _opt_list(rec.est_group_step),
            "est_violations": _opt_list(rec.est_violations),
        }, sort_keys=True))
    mix = transcript.final_mixture
    policy_ids = {p.key(): i for i, p in enumerate(transcript.policies)}
    lines.append(json.dumps({
        "record": "summary",
        "algorithm": transcript.algorithm,
        "num_groups": transcript.num_groups,
        "config": asdict(transcript.config),
        "lambda_avg": transcript.final_lambda.values.tolist(),
        "bound": transcript.final_lambda.bound,
        "mixture": {
            "policy_ids": [policy_ids[p.key()] for p in mix.policies],
            "weights": mix.weights.tolist(),
        },
        "policies": [_policy_doc(i, p)
                     for i, p in enumerate(transcript.policies)],
        "num_actions": transcript.policies[0].num_actions,
    }, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")


def read_transcript(path) -> GameTranscript:
    lines = [json.loads(line) for line in
             Path(path).read_text().splitlines() if line.strip()]
    if not lines or lines[-1].get("record") != "summary":
        raise ConfigurationError(f"{path}: transcript must end with a summary record")
    summary = lines[-1]
    records = []
    for doc in lines[:-1]:
        if doc.get("record") != "round":
            raise ConfigurationError(f"{path}: unexpected record {doc.get('record')!r}")
        records.append(RoundRecord(
            t=doc["t"], lam=np.array(doc["lambda"]),
            lam_avg=np.array(doc["lambda_avg"]), policy_id=doc["policy_id"],
            objective=doc["objective"], policy_total=doc["policy_total"],
            policy_group=np.array(doc["policy_group"]),
            mixture_total_step=doc["mixture_total_step"],
            mixture_group_step=np.array(doc["mixture_group_step"]),
            est_total_step=doc.get("est_total_step"),
            est_group_step=None if doc.get("est_group_step") is None
            else np.array(doc["est_group_step"]),
            est_violations=None if doc.get("est_violations") is None
            else np.array(doc["est_violations"])))
    num_actions = summary["num_actions"]
    policies = [_policy_from_doc(d, num_actions) for d in summary["policies"]]
    mix = PolicyMixture(
        tuple(policies[i] for i in summary["mixture"]["policy_ids"]),
        np.array(summary["mixture"]["weights"]))
    return GameTranscript(
        algorithm=summary["algorithm"],
        config=SolverConfig(**summary["config"]),
        num_groups=summary["num_groups"],
        records=records,
        policies=policies,
        final_mixture=mix,
        final_lambda=LagrangeWeights(np.array(summary["lambda_avg"]),
                                     summary["bound"]))


# ---------------------------------------------------------------------------
# CSV emitters
# ---------------------------------------------------------------------------

def write_group_rewards_csv(transcript: GameTranscript, path) -> None:
    """Per-iteration per-group average-reward table.

    `est_*` columns are the estimates the regulator acted on (values of the
    mixture entering the round); `exact_*` columns are exact per-step values
    of the mixture after the round.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    G = transcript.num_groups
    header = (["iteration"]
              + [f"est_group_{g}" for g in range(G)] + ["est_total"]
              + [f"exact_group_{g}" for g in range(G)] + ["exact_total"])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in transcript.records:
            est = ([""] * (G + 1) if rec.est_group_step is None else
                   [f"{v:.10g}" for v in rec.est_group_step]
                   + [f"{rec.est_total_step:.10g}"])
            exact = ([f"{v:.10g}" for v in rec.mixture_group_step]
                     + [f"{rec.mixture_total_step:.10g}"])
            writer.writerow([rec.t] + est + exact)


def write_occupancy_csv(fair: np.ndarray, unconstrained: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "fair_mixture", "unconstrained"])
        for s, (a, b) in enumerate(zip(fair, unconstrained)):
            writer.writerow([s, f"{a:.10g}", f"{b:.10g}"])


def write_pareto_csv(rows: list[dict], num_groups: int, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (["alpha_per_step", "status", "total_step_avg", "group_spread"]
              + [f"group_{g}" for g in range(num_groups)])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            if row["status"] == "ok":
                writer.writerow(
                    [f"{row['alpha_per_step']:.10g}", "ok",
                     f"{row['total_step_avg']:.10g}",
                     f"{row['group_spread']:.10g}"]
                    + [f"{v:.10g}" for v in row["groups"]])
            else:
                writer.writerow([f"{row['alpha_per_step']:.10g}",
                                 row["status"], "", ""] + [""] * num_groups)


def read_csv_rows(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
