"""Confidence-gated model updates: self-training, oracle queries, minority SMOTE."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .config import ConfigError
from .refine import RefinedPrediction

log = logging.getLogger(__name__)

SELF_TRAIN = "self_train"
QUERY = "query"
IGNORE = "ignore"
KINDS = (SELF_TRAIN, QUERY, IGNORE)


@dataclass
class UpdateDecision:
    kind: str
    r_star: float
    chosen_label: str | None = None
    query_options: tuple[str, ...] = ()


def check_thresholds(pi: float, rho: float) -> None:
    if not 0.0 < rho < pi <= 1.0:
        raise ConfigError(f"thresholds must satisfy 0 < rho < pi <= 1 (rho={rho}, pi={pi})")


def decide(
    refined: RefinedPrediction,
    activities: Sequence[str],
    pi: float = 0.7,
    rho: float = 0.45,
    k_options: int = 3,
) -> UpdateDecision:
    """``r* >= pi`` self-trains, ``r* < rho`` queries, anything between is ignored.

    A refinement fallback never self-trains (it is downgraded to ignore).
    For queries ``chosen_label`` is left for the oracle to fill in.
    """
    check_thresholds(pi, rho)
    probs = refined.refined
    r_star = float(probs.max())
    if r_star >= pi:
        if refined.fallback_used:
            return UpdateDecision(IGNORE, r_star)
        return UpdateDecision(SELF_TRAIN, r_star, activities[int(np.argmax(probs))])
    if r_star < rho:
        order = np.argsort(-probs, kind="stable")[:k_options]
        return UpdateDecision(QUERY, r_star, None, tuple(activities[i] for i in order))
    return UpdateDecision(IGNORE, r_star)


class Oracle(Protocol):
    def answer(self, query_options: Sequence[str], truth: str | None = None) -> str: ...


class GroundTruthOracle:
    """Replays the true label, whether or not it is among the options."""

    def __init__(self):
        self.n_queries = 0

    def answer(self, query_options: Sequence[str], truth: str | None = None) -> str:
        if truth is None:
            raise ValueError("ground-truth oracle needs the segment's true label")
        self.n_queries += 1
        return truth


class FirstOptionOracle:
    """Stand-in for an interactive user: always picks the top option."""

    def __init__(self):
        self.n_queries = 0

    def answer(self, query_options: Sequence[str], truth: str | None = None) -> str:
        self.n_queries += 1
        return query_options[0]


class MinorityBuffer:
    """Recent feature vectors of minority activities, bounded per class."""

    def __init__(self, minority: Iterable[str], capacity: int = 50):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.minority = frozenset(minority)
        self.capacity = capacity
        self._buf: dict[str, deque] = {a: deque(maxlen=capacity) for a in sorted(self.minority)}

    def __contains__(self, activity: str) -> bool:
        return activity in self.minority

    def add(self, activity: str, values: np.ndarray) -> None:
        if activity not in self.minority:
            raise ValueError(f"{activity!r} is not a minority activity")
        self._buf[activity].append(np.asarray(values, dtype=float))

    def get(self, activity: str) -> list[np.ndarray]:
        return list(self._buf.get(activity, ()))

    def size(self, activity: str) -> int:
        return len(self._buf.get(activity, ()))


def smote_generate(
    sample: np.ndarray,
    neighbors: Sequence[np.ndarray],
    q: int = 3,
    k_nn: int = 5,
    rng: np.random.Generator | None = None,
) -> list[np.ndarray]:
    """``q`` points ``sample + u * (nbr - sample)``, ``u ~ U(0, 1)``, with ``nbr``
    drawn from the ``k_nn`` Euclidean-nearest entries of ``neighbors``."""
    if q <= 0:
        return []
    if len(neighbors) == 0:
        log.warning("SMOTE skipped: empty minority buffer")
        return []
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.asarray(sample, dtype=float)
    pool = np.asarray(neighbors, dtype=float)
    dist = np.linalg.norm(pool - x, axis=1)
    nearest = np.argsort(dist, kind="stable")[: min(k_nn, len(pool))]
    out = []
    for _ in range(q):
        nbr = pool[nearest[rng.integers(len(nearest))]]
        u = rng.random()
        out.append(x + u * (nbr - x))
    return out


@dataclass
class UpdateStats:
    updates: int = 0
    synthetic: int = 0
    queries: int = 0
    smote_skipped: int = 0
    kinds: dict[str, int] = field(default_factory=lambda: {k: 0 for k in KINDS})


def apply_decision(
    decision: UpdateDecision,
    fv: np.ndarray,
    model,
    buffer: MinorityBuffer,
    q: int = 3,
    k_nn: int = 5,
    rng: np.random.Generator | None = None,
    stats: UpdateStats | None = None,
) -> UpdateStats:
    """Feed ``(fv, chosen_label)`` to the model; for minority labels also feed
    ``q`` SMOTE samples built from the label's buffer, then buffer ``fv``.

    ``model`` only needs an ``update(values, label)`` method.
    """
    if decision.kind == IGNORE:
        raise ValueError("ignore decisions must not reach apply_decision")
    if decision.chosen_label is None:
        raise ValueError("decision has no label (unanswered query?)")
    stats = stats if stats is not None else UpdateStats()
    label = decision.chosen_label
    values = np.asarray(fv, dtype=float)
    model.update(values, label)
    stats.updates += 1
    if decision.kind == QUERY:
        stats.queries += 1
    if label in buffer:
        if buffer.size(label) == 0:
            stats.smote_skipped += 1
        else:
            for synth in smote_generate(values, buffer.get(label), q, k_nn, rng):
                model.update(synth, label)
                stats.updates += 1
                stats.synthetic += 1
        buffer.add(label, values)
    return stats
