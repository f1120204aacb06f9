import numpy as np
import pytest

from ctxhar.context import DiscretizedContext, RuleSet, discretize, parse_rules
from ctxhar.ingest import ContextSnapshot
from ctxhar.refine import refine, unrefined

ACTS = ["cycling", "running", "walking", "standing"]


def test_park_example(default_kb):
    kb = default_kb.restrict(ACTS)
    ctx = discretize(ContextSnapshot(0, semantic_place="park", speed_mps=10 / 3.6), kb.places)
    out = refine([0.45, 0.40, 0.10, 0.05], ctx, kb, ACTS)
    assert out.removed == {"cycling"}
    np.testing.assert_allclose(out.refined, [0.0, 0.40 / 0.55, 0.10 / 0.55, 0.05 / 0.55], rtol=0, atol=1e-12)
    assert np.round(out.refined * 100).tolist() == [0, 73, 18, 9]
    assert out.r_star == pytest.approx(0.7272727272727273, abs=1e-12)
    assert not out.fallback_used


def test_all_consistent_is_identity():
    out = refine([0.2, 0.3, 0.5, 0.0], DiscretizedContext(), RuleSet({}), ACTS)
    assert out.refined.tolist() == [0.2, 0.3, 0.5, 0.0] and out.removed == frozenset()


def test_all_inconsistent_falls_back():
    kb = parse_rules("\n".join(f"activity {a}: speed_band=high" for a in ACTS))
    p = [0.1, 0.2, 0.3, 0.4]
    out = refine(p, DiscretizedContext(speed_band="zero"), kb, ACTS)
    assert out.fallback_used and out.refined.tolist() == p


def test_zero_probability_not_tested():
    kb = parse_rules("activity cycling: speed_band=high")
    out = refine([0.0, 0.5, 0.5, 0.0], DiscretizedContext(speed_band="zero"), kb, ACTS)
    assert out.removed == frozenset()


def test_length_mismatch():
    with pytest.raises(ValueError):
        refine([1.0], DiscretizedContext(), RuleSet({}), ACTS)


def test_unrefined_copies():
    p = np.array([0.5, 0.5])
    out = unrefined(p)
    p[0] = 9
    assert out.refined.tolist() == [0.5, 0.5] and not out.fallback_used
