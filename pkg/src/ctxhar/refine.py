"""Context refinement of a predicted activity distribution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .context import DiscretizedContext, RuleSet, is_consistent


@dataclass
class RefinedPrediction:
    refined: np.ndarray
    removed: frozenset[str] = field(default_factory=frozenset)
    fallback_used: bool = False

    @property
    def r_star(self) -> float:
        return float(self.refined.max())


def refine(
    pred: Sequence[float] | np.ndarray,
    ctx: DiscretizedContext,
    kb: RuleSet,
    activities: Sequence[str],
) -> RefinedPrediction:
    """Zero out context-inconsistent activities and renormalize the rest.

    Only activities with non-zero probability are checked. If nothing
    survives, ``pred`` is returned unchanged with ``fallback_used`` set.
    """
    p = np.asarray(pred, dtype=float)
    if p.shape != (len(activities),):
        raise ValueError("distribution and activity list differ in length")
    keep = np.ones(len(p), dtype=bool)
    for i, activity in enumerate(activities):
        if p[i] > 0 and not is_consistent(activity, ctx, kb):
            keep[i] = False
    removed = frozenset(a for a, k in zip(activities, keep) if not k)
    if not removed:
        return RefinedPrediction(p.copy())
    mass = p[keep].sum()
    if mass <= 0:
        return RefinedPrediction(p.copy(), removed, fallback_used=True)
    out = np.where(keep, p, 0.0) / mass
    return RefinedPrediction(out, removed)


def unrefined(pred: Sequence[float] | np.ndarray) -> RefinedPrediction:
    """Wrap a distribution that skips refinement (modes without context reasoning)."""
    return RefinedPrediction(np.asarray(pred, dtype=float).copy())
