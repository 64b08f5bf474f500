"""Group membership functions over states and their optimization oracles.

A group is a {0,1}-valued function of a state's feature vector.  Two
representations are supported: an explicit membership bit per state, and a
monotone conjunction over feature indices (member iff all indexed features
are 1; the empty conjunction accepts everything).

The two oracles pick the group minimizing a linear score, breaking ties
toward the lowest group index.  Both are implemented by enumeration over the
listed groups; `conjunction_class_argmin` provides the same contract over the
implicit class of all 2^d monotone conjunctions without materializing it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class GroupFunction:
    """One group: either explicit per-state bits or a monotone conjunction."""

    explicit: np.ndarray | None = None
    conjunction: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.explicit is None) == (self.conjunction is None):
            raise ConfigurationError(
                "exactly one of explicit/conjunction must be given")
        if self.explicit is not None:
            bits = np.asarray(self.explicit)
            if bits.ndim != 1 or np.any((bits != 0) & (bits != 1)):
                raise ConfigurationError("explicit membership must be a bit vector")
            b = bits.astype(np.uint8)
            b.setflags(write=False)
            object.__setattr__(self, "explicit", b)
        else:
            idx = tuple(int(i) for i in self.conjunction)
            if any(i < 0 for i in idx):
                raise ConfigurationError("conjunction indices must be nonnegative")
            object.__setattr__(self, "conjunction", tuple(sorted(set(idx))))

    @classmethod
    def from_bits(cls, bits) -> "GroupFunction":
        return cls(explicit=np.asarray(bits))

    @classmethod
    def from_conjunction(cls, indices) -> "GroupFunction":
        return cls(conjunction=tuple(indices))

    @property
    def is_conjunction(self) -> bool:
        return self.conjunction is not None

    def on_features(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on feature vectors; x is (d,) or (n, d); returns uint8 bits."""
        if self.conjunction is None:
            raise ConfigurationError(
                "explicit groups are defined over states, not feature vectors")
        x = np.atleast_2d(np.asarray(x))
        if self.conjunction and max(self.conjunction) >= x.shape[1]:
            raise ConfigurationError(
                f"conjunction over indices {self.conjunction} needs feature "
                f"dimension > {max(self.conjunction)}, got {x.shape[1]}")
        if not self.conjunction:
            out = np.ones(x.shape[0], dtype=np.uint8)
        else:
            out = np.all(x[:, list(self.conjunction)] != 0, axis=1).astype(np.uint8)
        return out

    def on_states(self, features: np.ndarray | None) -> np.ndarray:
        """Membership bits for every state, via the ambient feature table."""
        if self.explicit is not None:
            return self.explicit
        if features is None:
            raise ConfigurationError(
                "conjunction group needs a state feature table")
        return self.on_features(features)


def evaluate(g: GroupFunction, state_or_features) -> int:
    """Membership bit of a state index (explicit groups) or feature vector."""
    if np.isscalar(state_or_features) or (
            isinstance(state_or_features, np.ndarray) and state_or_features.ndim == 0):
        s = int(state_or_features)
        if g.explicit is None:
            raise ConfigurationError(
                "conjunction group cannot evaluate a bare state index; "
                "pass the state's feature vector")
        if not 0 <= s < len(g.explicit):
            raise ConfigurationError(
                f"state {s} out of range for {len(g.explicit)} states")
        return int(g.explicit[s])
    return int(g.on_features(np.asarray(state_or_features))[0])


@dataclass(frozen=True, eq=False)
class SeparatorSet:
    """Contexts on which any two distinct groups of a class must disagree."""

    points: np.ndarray  # (m, d) feature vectors

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points)).astype(np.uint8)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class GroupSet:
    """Ordered, stably indexed collection of groups.

    `features` is the ambient (S, d) state feature table; it is required to
    evaluate conjunction groups at states.
    """

    functions: tuple
    features: np.ndarray | None = None
    separator: SeparatorSet | None = None

    def __post_init__(self):
        if len(self.functions) == 0:
            raise ConfigurationError("group set must be nonempty")
        object.__setattr__(self, "functions", tuple(self.functions))
        if self.features is not None:
            f = np.asarray(self.features).astype(np.uint8)
            f.setflags(write=False)
            object.__setattr__(self, "features", f)

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def membership(self, features: np.ndarray | None = None) -> np.ndarray:
        """(G, S) matrix of membership bits over states."""
        table = self.features if features is None else np.asarray(features)
        return np.stack([g.on_states(table) for g in self.functions])

    def eval_contexts(self, contexts: np.ndarray) -> np.ndarray:
        """(G, t) membership bits over a (t, d) matrix of feature vectors."""
        contexts = np.atleast_2d(np.asarray(contexts))
        if contexts.shape[0] == 0:
            return np.zeros((len(self), 0), dtype=np.uint8)
        return np.stack([g.on_features(contexts) for g in self.functions])

    def state_features(self, state: int) -> np.ndarray:
        if self.features is None:
            raise ConfigurationError("group set carries no state feature table")
        return self.features[state]


def lin_opt(groups: GroupSet, costs: np.ndarray) -> int:
    """Index of the group minimizing sum_s g(s) * costs[s] (lowest index on ties)."""
    costs = np.asarray(costs, dtype=float)
    member = groups.membership()
    if costs.shape != (member.shape[1],):
        raise ConfigurationError(
            f"cost vector shape {costs.shape} != ({member.shape[1]},)")
    return int(np.argmin(member @ costs))


def opt_seq(groups: GroupSet, contexts, costs) -> int:
    """Index of the group minimizing sum_i g(context_i) * costs[i].

    Contexts are feature vectors, shape (t, d).  An empty sequence scores all
    groups equally, so group 0 wins by the tie rule.
    """
    costs = np.asarray(costs, dtype=float)
    contexts = np.asarray(contexts)
    if contexts.size == 0 and costs.size == 0:
        return 0
    contexts = np.atleast_2d(contexts)
    if contexts.shape[0] != costs.shape[0]:
        raise ConfigurationError(
            f"{contexts.shape[0]} contexts but {costs.shape[0]} costs")
    member = groups.eval_contexts(contexts)
    return int(np.argmin(member @ costs))


def conjunction_separator(feature_dim: int) -> SeparatorSet:
    """The d all-ones-but-one vectors; they separate any two distinct
    monotone conjunctions over d features."""
    if feature_dim < 1:
        raise ConfigurationError("feature_dim must be >= 1")
    points = np.ones((feature_dim, feature_dim), dtype=np.uint8) - np.eye(
        feature_dim, dtype=np.uint8)
    return SeparatorSet(points)


def verify_separator(groups: GroupSet, separator: SeparatorSet):
    """Exhaustive pairwise check that the separator distinguishes every pair.

    Returns (ok, first_failing_pair); the pair is None when ok.
    """
    member = groups.eval_contexts(separator.points)  # (G, m)
    n = len(groups)
    for i in range(n):
        for j in range(i + 1, n):
            if np.array_equal(member[i], member[j]):
                return False, (i, j)
    return True, None


def all_conjunctions(feature_dim: int) -> Iterator[GroupFunction]:
    """All 2^d monotone conjunctions, indexed by ascending feature bitmask."""
    for mask in range(1 << feature_dim):
        yield GroupFunction.from_conjunction(
            [j for j in range(feature_dim) if mask >> j & 1])


def conjunction_class_argmin(contexts: np.ndarray, costs: np.ndarray,
                             feature_dim: int, chunk: int = 1 << 14) -> int:
    """Argmin of sum_i g(context_i) * costs[i] over all 2^d conjunctions.

    Returns the bitmask index of the winning conjunction (ties toward the
    smallest mask), matching the indexing of `all_conjunctions`.  Works
    lazily in chunks so d up to ~20 stays tractable.
    """
    if feature_dim < 1 or feature_dim > 20:
        raise ConfigurationError("implicit conjunction class supports 1 <= d <= 20")
    contexts = np.atleast_2d(np.asarray(contexts)).astype(bool)
    costs = np.asarray(costs, dtype=float)
    if contexts.shape[0] != costs.shape[0]:
        raise ConfigurationError(
            f"{contexts.shape[0]} contexts but {costs.shape[0]} costs")
    # Pack each context into a bitmask; conjunction `mask` accepts context c
    # iff mask & c_bits == mask.
    weights = (1 << np.arange(feature_dim, dtype=np.int64))
    ctx_bits = contexts.astype(np.int64) @ weights      # (t,)
    best_mask, best_score = 0, np.inf
    for start in range(0, 1 << feature_dim, chunk):
        masks = np.arange(start, min(start + chunk, 1 << feature_dim),
                          dtype=np.int64)
        member = (ctx_bits[None, :] & masks[:, None]) == masks[:, None]
        scores = member @ costs
        k = int(np.argmin(scores))
        if scores[k] < best_score:
            best_score = float(scores[k])
            best_mask = int(masks[k])
    return best_mask
