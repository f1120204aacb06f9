"""Refine one classifier output with the current context.

A user at a park moving at a medium pace: the classifier leans towards
cycling, but cycling is not allowed in a park, so its mass is removed and the
remaining activities are renormalized.
"""

from ctxhar.context import DiscretizedContext, load_rules
from ctxhar.policy import decide
from ctxhar.refine import refine

activities = ["cycling", "running", "walking", "standing"]
kb = load_rules().restrict(activities)
ctx = DiscretizedContext(semantic_place="park", place_traits=kb.places["park"], speed_band="medium")

raw = [0.45, 0.40, 0.10, 0.05]
out = refine(raw, ctx, kb, activities)

print(f"context: place={ctx.semantic_place} traits={sorted(ctx.place_traits)} speed={ctx.speed_band}")
print(f"{'activity':<10} {'raw':>6} {'refined':>8}")
for act, p, q in zip(activities, raw, out.refined):
    print(f"{act:<10} {p:>6.2f} {q:>8.4f}")
print("removed:", sorted(out.removed))

before = decide(refine(raw, ctx.forget("semantic_place").forget("place_traits").forget("speed_band"), kb, activities),
                activities)
after = decide(out, activities)
print(f"decision without context: {before.kind} (r*={before.r_star:.2f})")
print(f"decision with context:    {after.kind} (r*={after.r_star:.2f}, label={after.chosen_label})")
