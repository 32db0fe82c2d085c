"""Walkthrough: choosing the match threshold from an exact false-positive
budget.

For unrelated images the number of matching bits is Binomial(96, 0.5);
the tail probabilities are computed exactly (they reach 2^-96, far below
anything measurable), so a threshold can be picked directly from the
acceptable false-positive rate.
"""

from provreg import matchstats

k = 96
print(f"{'target FPR':>12} {'tau':>5} {'max distance':>13} {'exact FPR':>14}")
for target in (1e-3, 1e-6, 1e-9, 1e-12, 1e-15):
    th = matchstats.threshold_for_fpr(target, k)
    p = matchstats.fpr(th.tau, k)
    print(f"{target:>12.0e} {th.tau:>5} {th.distance_form:>13} {p.as_float():>14.3g}")

print()
print("the distance-8 test used throughout the registry demos:")
p = matchstats.fpr(88, k)
print(f"  tau = 88 (distance <= 8): FPR = {p} = {p.as_float():.3g}")
