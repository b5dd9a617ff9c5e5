"""
The nonparametric comparison stack
==================================

Scott-Knott ESD ranks groups of metric samples into statistically distinct
tiers; Cliff's delta sizes the difference between two groups; Kendall's W and
tau measure agreement between rankings; the odds ratio compares sub-sequences
of cleaning orders; and the Wilcoxon rank-sum test compares two samples with
an exact small-sample path.
"""

import numpy as np

from dqa.stats import (
    cliffs_delta,
    kendalls_tau,
    kendalls_w,
    odds_ratio,
    scott_knott_esd,
    top_half_membership,
    wilcoxon_rank_sum,
)

rng = np.random.default_rng(4)

# Scott-Knott ESD: three learners, two of them indistinguishable ----------------

groups = {
    "forest": rng.normal(0.82, 0.02, 10),
    "logreg": rng.normal(0.81, 0.02, 10),
    "coin-flip": rng.normal(0.50, 0.02, 10),
}
table = scott_knott_esd(groups)
print("Scott-Knott ESD ranks (1 = best):")
for name, rank in sorted(table.ranks.items(), key=lambda kv: kv[1]):
    print(f"  rank {rank}: {name} (mean {np.mean(groups[name]):.3f})")

# Cliff's delta -----------------------------------------------------------------

result = cliffs_delta(groups["forest"], groups["coin-flip"])
print(f"\nCliff's delta forest vs coin-flip: {result.delta:+.2f} ({result.magnitude})")
result = cliffs_delta(groups["forest"], groups["logreg"])
print(f"Cliff's delta forest vs logreg:    {result.delta:+.2f} ({result.magnitude})")

# Kendall's W and tau ----------------------------------------------------------

agreeing = [{"f1": 1, "f2": 2, "f3": 3, "f4": 4} for _ in range(5)]
print(f"\nKendall's W, five identical rankings: {kendalls_w(agreeing):.3f}")
noisy = [
    {f"f{j}": int(r) for j, r in enumerate(rng.permutation(4) + 1)} for _ in range(5)
]
print(f"Kendall's W, five random rankings:    {kendalls_w(noisy):.3f}")
print(f"Kendall's tau, ranking vs its reverse: "
      f"{kendalls_tau({'a': 1, 'b': 2, 'c': 3}, {'a': 3, 'b': 2, 'c': 1}):+.1f}")

# top-half membership + odds ratio ----------------------------------------------

per_order = {f"order{i}": 0.7 + 0.01 * i for i in range(12)}
top = top_half_membership(per_order)
print(f"\ntop-half orders: {sorted(top)}")
result = odds_ratio(6, 4, 4, 6)
print(f"odds ratio 6:4 vs 4:6 = {result.or_value:.2f} "
      f"({'important' if result.important else 'unimportant'})")

# Wilcoxon rank-sum ---------------------------------------------------------------

same = wilcoxon_rank_sum([1, 2, 3, 4], [1, 2, 3, 4])
shifted = wilcoxon_rank_sum(rng.normal(0, 1, 30), rng.normal(1.2, 1, 30))
print(f"\nWilcoxon p, identical samples: {same:.3f}")
print(f"Wilcoxon p, shifted samples:   {shifted:.5f}")
