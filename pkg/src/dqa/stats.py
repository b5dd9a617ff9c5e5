"""Nonparametric comparison stack: Scott-Knott ESD, Cliff's delta, Kendall's W
and tau-b, odds ratios, top-half membership, and the Wilcoxon rank-sum test.

All functions are pure and operate on plain sequences / mappings, so they can
rank model metrics, feature-importance scores, or anything else shaped as
named groups of samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import chi2, norm, rankdata

NEGLIGIBLE = "Negligible"
SMALL = "Small"
MEDIUM = "Medium"
LARGE = "Large"

# Cliff's delta magnitude cut points; the conventional medium band is read
# as 0.33 < |d| <= 0.474 so the bands leave no gap.
_DELTA_BANDS = ((0.147, NEGLIGIBLE), (0.33, SMALL), (0.474, MEDIUM))

OR_UNIMPORTANT_LOW = 0.64
OR_UNIMPORTANT_HIGH = 1.5

_PI = math.pi


class StatsError(ValueError):
    pass


# -- Scott-Knott ESD -----------------------------------------------------------


@dataclass(frozen=True)
class RankTable:
    """Groups partitioned into statistically distinct ranks (1 = highest mean)."""

    ranks: dict[str, int]
    groups: dict[str, np.ndarray]

    def rank_of(self, name: str) -> int:
        return self.ranks[name]

    def n_ranks(self) -> int:
        return max(self.ranks.values()) if self.ranks else 0

    def by_rank(self) -> dict[int, tuple[str, ...]]:
        out: dict[int, list[str]] = {}
        for name, r in self.ranks.items():
            out.setdefault(r, []).append(name)
        return {r: tuple(sorted(names)) for r, names in sorted(out.items())}


def cohen_d(a, b) -> float:
    """Pooled-variance standardized mean difference."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    dof = na + nb - 2
    diff = float(np.mean(a) - np.mean(b))
    if dof <= 0:
        return math.copysign(math.inf, diff) if diff != 0.0 else 0.0
    pooled = ((na - 1) * np.var(a, ddof=1) + (nb - 1) * np.var(b, ddof=1)) / dof
    if pooled <= 0.0:
        return math.copysign(math.inf, diff) if diff != 0.0 else 0.0
    return diff / math.sqrt(pooled)


def _sk_split_significant(names, groups, alpha: float, d_merge: float):
    """Best contiguous split of mean-sorted groups, or None if not accepted.

    The split maximizes the between-group sum of squares of the group means.
    It is accepted when the lambda statistic is significant under its
    chi-squared approximation with k/(pi-2) degrees of freedom and the
    standardized effect across the split is at least ``d_merge``.
    """
    k = len(names)
    if k < 2:
        return None
    means = np.array([np.mean(groups[n]) for n in names])
    grand = means.mean()
    best_b, best_j = -1.0, None
    for j in range(1, k):
        left, right = means[:j], means[j:]
        b = j * (left.mean() - grand) ** 2 + (k - j) * (right.mean() - grand) ** 2
        if b > best_b:
            best_b, best_j = b, j
    if best_b <= 0.0:
        return None

    sizes = np.array([len(groups[n]) for n in names])
    nu0 = int((sizes - 1).sum())
    within = sum(float(((np.asarray(groups[n]) - means[i]) ** 2).sum()) for i, n in enumerate(names))
    mse = within / nu0 if nu0 > 0 else 0.0
    s2_mean = mse / sizes.mean() if sizes.mean() > 0 else 0.0
    sigma0 = (float(((means - grand) ** 2).sum()) + nu0 * s2_mean) / (k + nu0)
    if sigma0 <= 0.0:
        return None
    lam = _PI / (2.0 * (_PI - 2.0)) * best_b / sigma0
    df = k / (_PI - 2.0)
    if chi2.sf(lam, df) >= alpha:
        return None

    left_samples = np.concatenate([np.asarray(groups[n], dtype=float) for n in names[:best_j]])
    right_samples = np.concatenate([np.asarray(groups[n], dtype=float) for n in names[best_j:]])
    if abs(cohen_d(left_samples, right_samples)) < d_merge:
        return None
    return best_j


def scott_knott_esd(groups, alpha: float = 0.05, d_merge: float = 0.147) -> RankTable:
    """Partition named sample groups into statistically distinct ranks.

    Groups are sorted by mean (descending) and recursively split at the
    contiguous boundary maximizing the between-group sum of squares; a split
    stands only if it is both statistically significant at ``alpha`` and at
    least a ``d_merge`` standardized effect, so negligible differences merge
    into a shared rank.  The default ``d_merge`` aligns with the negligible
    band of Cliff's delta.
    """
    if not groups:
        raise StatsError("at least one group required")
    materialized = {}
    for name, samples in groups.items():
        arr = np.asarray(samples, dtype=float)
        if arr.size < 2:
            raise StatsError(f"group {name!r} needs at least 2 samples")
        materialized[name] = arr
    order = sorted(materialized, key=lambda n: (-float(np.mean(materialized[n])), n))

    ranks: dict[str, int] = {}
    clusters: list[list[str]] = []

    def recurse(names: list[str]):
        j = _sk_split_significant(names, materialized, alpha, d_merge)
        if j is None:
            clusters.append(names)
        else:
            recurse(names[:j])
            recurse(names[j:])

    recurse(order)
    for rank, cluster in enumerate(clusters, start=1):
        for name in cluster:
            ranks[name] = rank
    return RankTable(ranks=ranks, groups=materialized)


# -- Cliff's delta ---------------------------------------------------------------


@dataclass(frozen=True)
class CliffsResult:
    delta: float
    magnitude: str


def delta_magnitude(delta: float) -> str:
    a = abs(delta)
    for cut, label in _DELTA_BANDS:
        if a <= cut:
            return label
    return LARGE


def cliffs_delta(a, b) -> CliffsResult:
    """Dominance effect size: (#(a_i > b_j) - #(a_i < b_j)) / (|a| * |b|).

    Computed from pooled midranks, which equals the all-pairs count exactly
    while staying O((n+m) log(n+m)).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise StatsError("empty input")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u1 = float(ranks[: a.size].sum()) - a.size * (a.size + 1) / 2.0
    # (#gt - #lt) = 2*U1 - n*m is integer-valued and exact in floats, so the
    # single division makes cliffs_delta(a, b) == -cliffs_delta(b, a) bit-exact
    delta = (2.0 * u1 - a.size * b.size) / (a.size * b.size)
    return CliffsResult(delta=delta, magnitude=delta_magnitude(delta))


# -- Kendall's W and tau-b --------------------------------------------------------


def _common_items(rankings) -> list:
    items = sorted(rankings[0])
    key = set(items)
    for r in rankings[1:]:
        if set(r) != key:
            raise StatsError("rankings cover different item sets")
    return items


def kendalls_w(rankings) -> float:
    """Concordance among m rankings of the same n items, with tie correction.

    W = 12 S / (m^2 (n^3 - n) - m T) where S is the squared deviation of the
    per-item rank sums and T the usual tie correction.  Input ranks are
    re-expressed as average ranks so that shared rank numbers are handled as
    proper ties.
    """
    rankings = list(rankings)
    if len(rankings) < 2:
        raise StatsError("need at least two rankings")
    items = _common_items(rankings)
    n = len(items)
    if n < 2:
        raise StatsError("need at least two items")
    m = len(rankings)
    matrix = np.vstack([rankdata([r[i] for i in items]) for r in rankings])
    sums = matrix.sum(axis=0)
    s = float(((sums - sums.mean()) ** 2).sum())
    t = 0.0
    for row in matrix:
        _, counts = np.unique(row, return_counts=True)
        t += float((counts**3 - counts).sum())
    denom = m * m * (n**3 - n) - m * t
    if denom <= 0.0:
        return 0.0
    return 12.0 * s / denom


def kendalls_tau(r1, r2) -> float:
    """Tie-corrected Kendall's tau-b between two rankings of the same items."""
    items = _common_items([r1, r2])
    n = len(items)
    if n < 2:
        raise StatsError("need at least two items")
    x = np.array([r1[i] for i in items], dtype=float)
    y = np.array([r2[i] for i in items], dtype=float)
    concordant = discordant = 0
    for i, j in combinations(range(n), 2):
        s = (x[i] - x[j]) * (y[i] - y[j])
        if s > 0:
            concordant += 1
        elif s < 0:
            discordant += 1
    n0 = n * (n - 1) / 2.0
    n1 = sum(c * (c - 1) / 2.0 for c in np.unique(x, return_counts=True)[1])
    n2 = sum(c * (c - 1) / 2.0 for c in np.unique(y, return_counts=True)[1])
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0.0:
        return 0.0
    return (concordant - discordant) / denom


# -- odds ratio ---------------------------------------------------------------------


@dataclass(frozen=True)
class OddsResult:
    or_value: float
    important: bool


def odds_ratio(ab_top: int, ab_not: int, ba_top: int, ba_not: int) -> OddsResult:
    """Odds of sequence AB landing in the top half relative to sequence BA.

    A Haldane-Anscombe +0.5 correction is applied to all four cells whenever
    any cell is zero, keeping the ratio finite.  Values inside
    [0.64, 1.5] are considered unimportant.
    """
    cells = [ab_top, ab_not, ba_top, ba_not]
    if any(c < 0 for c in cells):
        raise StatsError("counts must be nonnegative")
    if ab_top + ab_not == 0 or ba_top + ba_not == 0:
        raise StatsError("each sequence needs at least one observation")
    if 0 in cells:
        cells = [c + 0.5 for c in cells]
    at, an, bt, bn = cells
    value = (at / an) / (bt / bn)
    important = value < OR_UNIMPORTANT_LOW or value > OR_UNIMPORTANT_HIGH
    return OddsResult(or_value=value, important=important)


def top_half_membership(values) -> set:
    """Names whose metric is >= the median over all names (median ties included)."""
    if len(values) < 2:
        raise StatsError("need at least two entries")
    med = float(np.median(list(values.values())))
    return {name for name, v in values.items() if v >= med}


# -- Wilcoxon rank-sum (Mann-Whitney U) -----------------------------------------------


def _u_statistic(ranks: np.ndarray, positions, na: int) -> float:
    return float(ranks[list(positions)].sum()) - na * (na + 1) / 2.0


def wilcoxon_rank_sum(a, b) -> float:
    """Two-sided Mann-Whitney U p-value.

    Small samples (n + m <= 12) use exact enumeration of all assignments of
    the pooled values to the two groups: p is the fraction of assignments
    whose U deviates from its null mean at least as much as the observed U.
    Larger samples use the tie-corrected normal approximation with a 0.5
    continuity correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise StatsError("empty input")
    na, nb = a.size, b.size
    n = na + nb
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u_obs = _u_statistic(ranks, range(na), na)
    mean_u = na * nb / 2.0

    if n <= 12:
        dev_obs = abs(u_obs - mean_u)
        hits = total = 0
        for positions in combinations(range(n), na):
            total += 1
            if abs(_u_statistic(ranks, positions, na) - mean_u) >= dev_obs - 1e-12:
                hits += 1
        return hits / total

    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float((counts**3 - counts).sum()) / (n * (n - 1))
    var_u = na * nb / 12.0 * ((n + 1) - tie_term)
    if var_u <= 0.0:
        return 1.0
    big_u = max(u_obs, na * nb - u_obs)
    z = (big_u - mean_u - 0.5) / math.sqrt(var_u)
    return min(1.0, 2.0 * float(norm.sf(z)))
