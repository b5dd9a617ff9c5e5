import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kendalltau as scipy_kendalltau
from scipy.stats import mannwhitneyu as scipy_mannwhitneyu

from dqa.stats import (
    LARGE,
    MEDIUM,
    NEGLIGIBLE,
    SMALL,
    StatsError,
    cliffs_delta,
    cohen_d,
    delta_magnitude,
    kendalls_tau,
    kendalls_w,
    odds_ratio,
    scott_knott_esd,
    top_half_membership,
    wilcoxon_rank_sum,
)

# -- independent oracles -----------------------------------------------------------


def cliffs_brute_force(a, b):
    gt = sum(1 for x in a for y in b if x > y)
    lt = sum(1 for x in a for y in b if x < y)
    return (gt - lt) / (len(a) * len(b))


def wilcoxon_enumeration(a, b):
    """Exact two-sided p by enumerating which pooled positions belong to a."""
    pooled = list(a) + list(b)
    na = len(a)

    def u_of(positions):
        members = [pooled[i] for i in positions]
        rest = [pooled[i] for i in range(len(pooled)) if i not in set(positions)]
        gt = sum(1 for x in members for y in rest if x > y)
        ties = sum(1 for x in members for y in rest if x == y)
        return gt + 0.5 * ties

    mean_u = na * len(b) / 2.0
    observed = abs(u_of(tuple(range(na))) - mean_u)
    assignments = list(itertools.combinations(range(len(pooled)), na))
    hits = sum(1 for pos in assignments if abs(u_of(pos) - mean_u) >= observed - 1e-12)
    return hits / len(assignments)


# -- Cliff's delta ---------------------------------------------------------------


class TestCliffsDelta:
    def test_complete_dominance(self):
        result = cliffs_delta([1, 2, 3], [4, 5, 6])
        assert result.delta == -1.0
        assert result.magnitude == LARGE

    def test_identical_groups(self):
        result = cliffs_delta([1.5, 2.5, 3.5], [1.5, 2.5, 3.5])
        assert result.delta == 0.0
        assert result.magnitude == NEGLIGIBLE

    def test_enumerated_nine_pairs(self):
        # pairs of ([1,2,3], [2,3,4]): one a>b, six a<b -> (1-6)/9
        result = cliffs_delta([1, 2, 3], [2, 3, 4])
        assert result.delta == pytest.approx(-5.0 / 9.0, abs=1e-15)
        assert result.magnitude == LARGE

    def test_brute_force_oracle_hundred_pairs(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            a = rng.integers(0, 8, rng.integers(1, 21)).astype(float)
            b = rng.integers(0, 8, rng.integers(1, 21)).astype(float)
            assert cliffs_delta(a, b).delta == pytest.approx(cliffs_brute_force(a, b), abs=1e-12)

    def test_band_cut_points(self):
        assert delta_magnitude(0.147) == NEGLIGIBLE
        assert delta_magnitude(0.1471) == SMALL
        assert delta_magnitude(0.33) == SMALL
        assert delta_magnitude(0.331) == MEDIUM
        assert delta_magnitude(0.474) == MEDIUM
        assert delta_magnitude(0.4741) == LARGE

    def test_empty_input(self):
        with pytest.raises(StatsError):
            cliffs_delta([], [1.0])

    @given(
        st.lists(st.integers(-5, 5), min_size=1, max_size=12),
        st.lists(st.integers(-5, 5), min_size=1, max_size=12),
    )
    @settings(max_examples=60, deadline=None)
    def test_antisymmetry(self, a, b):
        assert cliffs_delta(a, b).delta == -cliffs_delta(b, a).delta


# -- Scott-Knott ESD -----------------------------------------------------------------


class TestScottKnott:
    def test_separated_groups_two_ranks(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            table = scott_knott_esd(
                {"lo": rng.normal(0, 1, 20), "hi": rng.normal(5, 1, 20)}
            )
            if table.n_ranks() == 2 and table.ranks["hi"] == 1:
                hits += 1
        assert hits >= 95

    def test_identical_distribution_single_rank(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            table = scott_knott_esd(
                {"a": rng.normal(0, 1, 20), "b": rng.normal(0, 1, 20)}
            )
            if table.n_ranks() == 1:
                hits += 1
        assert hits >= 90

    def test_copies_share_one_rank(self):
        samples = [0.4, 0.5, 0.6, 0.7]
        table = scott_knott_esd({"a": samples, "b": samples, "c": samples})
        assert table.n_ranks() == 1

    def test_single_group(self):
        table = scott_knott_esd({"only": [1.0, 2.0]})
        assert table.ranks == {"only": 1}

    def test_input_order_irrelevant(self):
        rng = np.random.default_rng(3)
        groups = {f"g{i}": rng.normal(i, 0.5, 10) for i in range(5)}
        forward = scott_knott_esd(groups)
        backward = scott_knott_esd(dict(reversed(list(groups.items()))))
        assert forward.ranks == backward.ranks

    def test_rank_count_bounded(self):
        rng = np.random.default_rng(9)
        for trial in range(10):
            groups = {f"g{i}": rng.normal(rng.uniform(-2, 2), 1, 8) for i in range(6)}
            table = scott_knott_esd(groups)
            assert 1 <= table.n_ranks() <= len(groups)

    def test_affine_rescaling_keeps_ranks(self):
        rng = np.random.default_rng(17)
        groups = {f"g{i}": rng.normal(2 * i, 1, 12) for i in range(4)}
        base = scott_knott_esd(groups)
        scaled = scott_knott_esd({k: 3.7 * np.asarray(v) + 11.0 for k, v in groups.items()})
        assert base.ranks == scaled.ranks

    def test_ranks_ordered_by_mean(self):
        rng = np.random.default_rng(23)
        groups = {"best": rng.normal(10, 1, 15), "mid": rng.normal(5, 1, 15), "worst": rng.normal(0, 1, 15)}
        table = scott_knott_esd(groups)
        assert table.ranks["best"] == 1
        assert table.ranks["best"] <= table.ranks["mid"] <= table.ranks["worst"]

    def test_small_group_rejected(self):
        with pytest.raises(StatsError):
            scott_knott_esd({"a": [1.0]})

    def test_cohen_d_magnitude(self):
        assert cohen_d([0, 0, 0, 0], [1, 1, 1, 1]) == -math.inf
        assert cohen_d([1.0, 2.0], [1.0, 2.0]) == 0.0


# -- Kendall's W and tau ----------------------------------------------------------------


class TestKendallsW:
    def test_identical_rankings(self):
        ranking = {"a": 1, "b": 2, "c": 3, "d": 4}
        assert kendalls_w([ranking] * 3) == pytest.approx(1.0, abs=1e-12)

    def test_identical_with_ties(self):
        ranking = {"a": 1, "b": 1, "c": 2, "d": 3}
        assert kendalls_w([ranking] * 4) == pytest.approx(1.0, abs=1e-12)

    def test_two_reversed_raters(self):
        r1 = {"a": 1, "b": 2}
        r2 = {"a": 2, "b": 1}
        assert kendalls_w([r1, r2]) == pytest.approx(0.0, abs=1e-12)

    def test_random_rankings_low_w(self):
        # 10 independent raters of 4 items: weak concordance dominates
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            rankings = [
                {f"i{j}": int(r) for j, r in enumerate(rng.permutation(4) + 1)} for _ in range(10)
            ]
            if kendalls_w(rankings) < 0.3:
                hits += 1
        assert hits >= 180

    def test_four_raters_ten_items_matches_chi2_theory(self):
        # with the standard normalization, P(W < 0.3) for 4 raters of 10
        # items is chi2_9.cdf(10.8) ~= 0.71, so the observed rate must land
        # in a band around it (this pins the denominator of W)
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            rankings = [
                {f"i{j}": int(r) for j, r in enumerate(rng.permutation(10) + 1)} for _ in range(4)
            ]
            if kendalls_w(rankings) < 0.3:
                hits += 1
        assert 120 <= hits <= 175

    def test_item_mismatch(self):
        with pytest.raises(StatsError):
            kendalls_w([{"a": 1, "b": 2}, {"a": 1, "c": 2}])


class TestKendallsTau:
    def test_identity(self):
        r = {"a": 1, "b": 2, "c": 3}
        assert kendalls_tau(r, r) == pytest.approx(1.0, abs=1e-12)

    def test_reversal(self):
        r1 = {"a": 1, "b": 2, "c": 3, "d": 4}
        r2 = {"a": 4, "b": 3, "c": 2, "d": 1}
        assert kendalls_tau(r1, r2) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_counted_case(self):
        # pairs: 5 concordant, 1 discordant -> (5-1)/6
        r1 = {"a": 1, "b": 2, "c": 3, "d": 4}
        r2 = {"a": 1, "b": 2, "c": 4, "d": 3}
        assert kendalls_tau(r1, r2) == pytest.approx(4.0 / 6.0, abs=1e-12)

    def test_matches_scipy_tau_b(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(3, 12))
            x = rng.integers(1, 5, n)
            y = rng.integers(1, 5, n)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            r1 = {f"i{j}": int(v) for j, v in enumerate(x)}
            r2 = {f"i{j}": int(v) for j, v in enumerate(y)}
            expected = scipy_kendalltau(x, y).statistic
            assert kendalls_tau(r1, r2) == pytest.approx(expected, abs=1e-12)


# -- odds ratio and top half -----------------------------------------------------------------


class TestOddsRatio:
    def test_hand_case(self):
        result = odds_ratio(6, 4, 4, 6)
        assert result.or_value == pytest.approx(2.25, abs=1e-12)
        assert result.important

    def test_symmetry_unimportant(self):
        result = odds_ratio(5, 5, 5, 5)
        assert result.or_value == pytest.approx(1.0, abs=1e-12)
        assert not result.important

    def test_zero_cell_corrected(self):
        result = odds_ratio(0, 6, 3, 3)
        assert math.isfinite(result.or_value)
        assert result.or_value > 0

    def test_all_zero_rejected(self):
        with pytest.raises(StatsError):
            odds_ratio(0, 0, 3, 3)

    @given(st.tuples(*[st.integers(1, 30)] * 4))
    @settings(max_examples=60, deadline=None)
    def test_reciprocal_identity(self, cells):
        a, b, c, d = cells
        forward = odds_ratio(a, b, c, d).or_value
        backward = odds_ratio(c, d, a, b).or_value
        assert forward * backward == pytest.approx(1.0, abs=1e-12)

    def test_importance_band_edges(self):
        assert not odds_ratio(64, 100, 100, 100).important
        assert not odds_ratio(150, 100, 100, 100).important
        assert odds_ratio(151, 100, 100, 100).important


class TestTopHalf:
    def test_twelve_distinct(self):
        values = {f"o{i}": float(i) for i in range(12)}
        assert len(top_half_membership(values)) == 6

    def test_all_equal(self):
        values = {f"o{i}": 1.0 for i in range(12)}
        assert len(top_half_membership(values)) == 12

    def test_one_to_twelve(self):
        values = {f"o{i}": float(i) for i in range(1, 13)}
        # median 6.5: members are the orders valued 7..12
        assert top_half_membership(values) == {f"o{i}" for i in range(7, 13)}


# -- Wilcoxon rank-sum ----------------------------------------------------------------------


class TestWilcoxon:
    def test_identical_samples(self):
        assert wilcoxon_rank_sum([1, 2, 3], [1, 2, 3]) >= 0.9

    def test_total_separation(self):
        p = wilcoxon_rank_sum(list(range(1, 11)), list(range(101, 111)))
        assert p < 0.01

    def test_exact_path_matches_enumeration_oracle(self):
        grid = list(itertools.product(range(3), repeat=3))
        for a in grid:
            for b in grid:
                assert wilcoxon_rank_sum(a, b) == pytest.approx(
                    wilcoxon_enumeration(a, b), abs=1e-12
                ), (a, b)

    def test_normal_path_matches_scipy(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            a = rng.normal(0, 1, int(rng.integers(8, 30)))
            b = rng.normal(0.5, 1, int(rng.integers(8, 30)))
            if len(a) + len(b) <= 12:
                continue
            expected = scipy_mannwhitneyu(
                a, b, alternative="two-sided", method="asymptotic", use_continuity=True
            ).pvalue
            assert wilcoxon_rank_sum(a, b) == pytest.approx(expected, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(StatsError):
            wilcoxon_rank_sum([], [1.0])
