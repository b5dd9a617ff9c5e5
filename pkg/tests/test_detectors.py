import warnings

import numpy as np
import pytest
from scipy.stats import spearmanr

from dqa import detectors as det
from dqa.detectors import Antipattern, DetectorError
from dqa.schema import builtin_sdp_rules, parse_rules
from dqa.synthetic import make_clean_dataset, make_dirty_dataset
from tests.conftest import build_dataset


def labels_for(n):
    y = np.zeros(n, dtype=np.int8)
    y[n // 2 :] = 1
    return y


class TestTailed:
    def test_single_huge_value_flagged(self):
        values = [1.0] * 9 + [1000.0]
        ds = build_dataset(np.array(values)[:, None], heu=labels_for(10))
        report = det.detect_tailed(ds, deviation_threshold=1.0)
        assert report.flagged_columns == ("c0",)

    def test_symmetric_column_never_flagged(self):
        ds = build_dataset(np.array([-2.0, -1.0, 0.0, 1.0, 2.0])[:, None], heu=labels_for(5))
        for threshold in (1e-9, 0.1, 1.0):
            assert det.detect_tailed(ds, threshold).flagged_columns == ()

    def test_constant_column_not_flagged(self):
        ds = build_dataset(np.full((6, 1), 4.2), heu=labels_for(6))
        assert det.detect_tailed(ds, 0.25).flagged_columns == ()


class TestUnnormalized:
    def test_large_scale_column_flagged(self):
        rng = np.random.default_rng(0)
        cols = [rng.normal(0, 1, 400) for _ in range(10)] + [rng.normal(0, 1000, 400)]
        ds = build_dataset(np.column_stack(cols), heu=labels_for(400))
        report = det.detect_unnormalized(ds, z_threshold=3.0)
        assert "c10" in report.flagged_columns
        # independent recomputation of the cross-column z of trimmed sds
        from dqa.dataset import column_stats

        tsds = np.array([column_stats(ds, n).trimmed_sd for n in ds.feature_names])
        z = np.abs(tsds - tsds.mean()) / tsds.std()
        assert z[10] > 3.0
        assert set(report.flagged_columns) >= {ds.feature_names[i] for i in np.flatnonzero(z > 3.0)}

    def test_identical_columns_unflagged(self):
        col = np.arange(20.0)
        ds = build_dataset(np.column_stack([col, col, col]), heu=labels_for(20))
        assert det.detect_unnormalized(ds, 3.0).flagged_columns == ()

    def test_single_column_rejected(self):
        ds = build_dataset(np.arange(5.0)[:, None], heu=labels_for(5))
        with pytest.raises(DetectorError):
            det.detect_unnormalized(ds)


class TestConstant:
    def test_exact_constant(self):
        ds = build_dataset(np.array([[7.0, 1.0], [7.0, 2.0], [7.0, 3.0]]), heu=labels_for(3))
        assert det.detect_constant(ds).flagged_columns == ("c0",)

    def test_near_constant_not_flagged(self):
        ds = build_dataset(np.array([[7.0], [7.0], [7.0000001]]), heu=labels_for(3))
        assert det.detect_constant(ds).flagged_columns == ()

    def test_all_zero_column(self):
        ds = build_dataset(np.zeros((5, 1)), heu=labels_for(5))
        assert det.detect_constant(ds).flagged_columns == ("c0",)


class TestDuplicates:
    def test_keep_first(self):
        ds = build_dataset([[1.0, 2.0], [1.0, 2.0], [3.0, 4.0]], heu=labels_for(3))
        assert det.detect_duplicates(ds).flagged_rows == (1,)

    def test_all_distinct(self):
        ds = build_dataset([[1.0], [2.0], [3.0]], heu=labels_for(3))
        assert det.detect_duplicates(ds).flagged_rows == ()

    def test_labels_ignored(self):
        ds = build_dataset([[1.0, 2.0], [1.0, 2.0]], heu=[0, 1], real=[1, 0])
        assert det.detect_duplicates(ds).flagged_rows == (1,)

    def test_removal_reaches_fixpoint(self):
        rng = np.random.default_rng(14)
        base = rng.integers(0, 3, (40, 2)).astype(float)  # coarse grid forces repeats
        ds = build_dataset(base, heu=labels_for(40))
        report = det.detect_duplicates(ds)
        assert report.flagged_rows
        deduped = ds.drop_rows(list(report.flagged_rows))
        assert det.detect_duplicates(deduped).flagged_rows == ()


class TestMissing:
    def test_no_mask(self, tiny_dataset):
        report = det.detect_missing(tiny_dataset)
        assert report.flagged_rows == ()
        assert report.scalar == 0.0

    def test_single_cell(self):
        from dqa.dataset import Dataset

        features = np.arange(12.0).reshape(6, 2)
        mask = np.zeros_like(features, dtype=bool)
        mask[4, 1] = True
        feats = features.copy()
        feats[mask] = np.nan
        ds = Dataset(
            id="m", feature_names=("a", "b"), features=feats,
            label_heuristic=labels_for(6), label_realistic=labels_for(6), missing_mask=mask,
        )
        report = det.detect_missing(ds)
        assert report.flagged_rows == (4,)
        assert report.scalar == 1.0


class TestDrift:
    def test_self_drift_zero(self):
        rng = np.random.default_rng(1)
        ds = build_dataset(rng.normal(0, 1, (100, 3)), heu=labels_for(100))
        report = det.detect_drift(ds, ds, js_threshold=1e-12, bins=20)
        assert report.flagged_columns == ()
        assert all(v == 0.0 for v in det.drift_divergences(ds, ds).values())

    def test_disjoint_supports_maximal(self):
        a = build_dataset(np.linspace(0, 1, 50)[:, None], heu=labels_for(50))
        b = build_dataset(np.linspace(10, 11, 50)[:, None], heu=labels_for(50))
        divergence = det.drift_divergences(a, b, bins=20)["c0"]
        assert divergence == pytest.approx(1.0, abs=1e-12)
        assert det.detect_drift(a, b, js_threshold=0.99, bins=20).flagged_columns == ("c0",)

    def test_small_shift_not_flagged(self):
        rng = np.random.default_rng(2)
        a = build_dataset(rng.normal(0, 1, (1000, 1)), heu=labels_for(1000))
        b = build_dataset(rng.normal(0.05, 1, (1000, 1)), heu=labels_for(1000))
        divergence = det.drift_divergences(a, b, bins=20)["c0"]
        assert divergence < 0.1
        assert det.detect_drift(a, b, js_threshold=0.1, bins=20).flagged_columns == ()

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = build_dataset(rng.normal(0, 1, (200, 2)), heu=labels_for(200))
        b = build_dataset(rng.normal(0.8, 1.5, (200, 2)), heu=labels_for(200))
        forward = det.drift_divergences(a, b)
        backward = det.drift_divergences(b, a)
        assert forward == backward

    def test_name_mismatch(self):
        a = build_dataset([[1.0]], heu=[0], names=("x",))
        b = build_dataset([[1.0]], heu=[0], names=("y",))
        with pytest.raises(DetectorError):
            det.detect_drift(a, b, 0.1, 10)


class TestClassImbalance:
    def test_boundary_not_flagged(self):
        y = np.array([0] * 90 + [1] * 10, dtype=np.int8)
        ds = build_dataset(np.zeros((100, 1)), heu=y)
        report = det.detect_class_imbalance(ds, threshold=0.10)
        assert report.scalar == pytest.approx(0.10)
        assert not report.flagged_dataset

    def test_flagged_below(self):
        y = np.array([0] * 95 + [1] * 5, dtype=np.int8)
        ds = build_dataset(np.zeros((100, 1)), heu=y)
        report = det.detect_class_imbalance(ds)
        assert report.scalar == pytest.approx(0.05)
        assert report.flagged_dataset

    def test_balanced(self):
        ds = build_dataset(np.zeros((10, 1)), heu=labels_for(10))
        assert not det.detect_class_imbalance(ds).flagged_dataset


class TestMislabels:
    def test_single_conflict(self):
        ds = build_dataset(np.zeros((3, 1)), heu=[1, 0, 1], real=[1, 1, 1])
        assert det.detect_mislabels(ds).flagged_rows == (1,)

    def test_identical_vectors(self):
        ds = build_dataset(np.zeros((3, 1)), heu=[0, 1, 0])
        assert det.detect_mislabels(ds).flagged_rows == ()

    def test_all_conflicting(self):
        ds = build_dataset(np.zeros((4, 1)), heu=[0, 0, 1, 1], real=[1, 1, 0, 0])
        assert det.detect_mislabels(ds).flagged_rows == (0, 1, 2, 3)


class TestClassOverlap:
    def test_pure_clusters_flag_nothing(self):
        rng = np.random.default_rng(4)
        a = rng.normal(0, 0.3, (30, 2))
        b = rng.normal(8, 0.3, (30, 2))
        ds = build_dataset(np.vstack([a, b]), heu=[0] * 30 + [1] * 30)
        report = det.detect_class_overlap_ikmcca(ds, k=2, p=0.5, seed=1)
        assert report.flagged_rows == ()

    def test_planted_intruders_recovered_exactly(self):
        rng = np.random.default_rng(5)
        centers = np.array([[0.0, 0.0], [9.0, 9.0]])
        rows, labels = [], []
        intruders = []
        for blob, center in enumerate(centers):
            for i in range(50):
                rows.append(center + rng.normal(0, 0.5, 2))
                wrong = i < 5  # 10% intruders per blob
                labels.append((1 - blob) if wrong else blob)
                if wrong:
                    intruders.append(len(rows) - 1)
        ds = build_dataset(np.array(rows), heu=np.array(labels, dtype=np.int8))
        report = det.detect_class_overlap_ikmcca(ds, k=2, p=0.5, seed=7)
        assert set(report.flagged_rows) == set(intruders)
        # brute-force: nearest true center must agree with the plant geometry
        x = np.array(rows)
        nearest = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
        for i in intruders:
            assert np.array(labels)[i] != nearest[i]

    def test_k_exceeds_rows(self):
        ds = build_dataset(np.zeros((4, 1)), heu=[0, 0, 1, 1])
        with pytest.raises(DetectorError):
            det.detect_class_overlap_ikmcca(ds, k=10, p=0.5, seed=0)

    def test_single_class_rejected(self):
        ds = build_dataset(np.zeros((4, 1)), heu=[1, 1, 1, 1])
        with pytest.raises(DetectorError):
            det.detect_class_overlap_ikmcca(ds, k=2, p=0.5, seed=0)

    def test_deterministic(self):
        ds = make_clean_dataset(2, rows=80, features=4)
        a = det.detect_class_overlap_ikmcca(ds, k=3, p=0.4, seed=11)
        b = det.detect_class_overlap_ikmcca(ds, k=3, p=0.4, seed=11)
        assert a.flagged_rows == b.flagged_rows


class TestCorrelatedRedundant:
    def test_perfect_pair_collapses(self):
        rng = np.random.default_rng(6)
        x = rng.normal(0, 1, 200)
        noise = rng.normal(0, 1, 200)
        ds = build_dataset(np.column_stack([x, 2 * x + 1e-6 * rng.normal(0, 1, 200), noise]),
                           heu=labels_for(200))
        report = det.detect_correlated_redundant(ds)
        assert len(set(report.flagged_columns) & {"c0", "c1"}) == 1
        assert "c2" not in report.flagged_columns

    def test_independent_columns_unflagged(self):
        rng = np.random.default_rng(7)
        data = rng.normal(0, 1, (500, 5))
        ds = build_dataset(data, heu=labels_for(500))
        report = det.detect_correlated_redundant(ds)
        assert report.flagged_columns == ()
        rho = np.abs(spearmanr(data).statistic)
        np.fill_diagonal(rho, 0)
        assert rho.max() < 0.7

    def test_linear_combination_flagged_in_pass_two(self):
        rng = np.random.default_rng(8)
        x = rng.normal(0, 1, 400)
        y = rng.normal(0, 1, 400)
        z = x + y
        ds = build_dataset(np.column_stack([x, y, z]), heu=labels_for(400))
        # pairwise spearman stays moderate but z is exactly predictable
        rho = np.abs(spearmanr(np.column_stack([x, y, z])).statistic)
        assert rho[0, 1] < 0.7
        report = det.detect_correlated_redundant(ds)
        assert len(report.flagged_columns) == 1

    def test_fixpoint_on_survivors(self):
        ds, _ = make_dirty_dataset(9, rows=200, informative=5, noise=3)
        report = det.detect_correlated_redundant(ds)
        survivors = ds.drop_columns(report.flagged_columns)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            again = det.detect_correlated_redundant(survivors)
        assert again.flagged_columns == ()

    def test_constant_excluded_with_warning(self):
        rng = np.random.default_rng(10)
        ds = build_dataset(
            np.column_stack([np.full(50, 2.0), rng.normal(0, 1, 50), rng.normal(0, 1, 50)]),
            heu=labels_for(50),
        )
        with pytest.warns(UserWarning, match="constant"):
            report = det.detect_correlated_redundant(ds)
        assert "c0" not in report.flagged_columns


class TestRowFeatureImbalance:
    def test_boundary(self):
        ds = build_dataset(np.zeros((650, 65)), heu=labels_for(650))
        report = det.detect_row_feature_imbalance(ds)
        assert report.scalar == pytest.approx(10.0)
        assert not report.flagged_dataset

    def test_square_flagged(self):
        ds = build_dataset(np.zeros((65, 65)), heu=labels_for(65))
        assert det.detect_row_feature_imbalance(ds).flagged_dataset

    def test_many_rows_not_flagged(self):
        ds = build_dataset(np.zeros((7120, 65)), heu=labels_for(7120))
        report = det.detect_row_feature_imbalance(ds)
        assert report.scalar == pytest.approx(7120 / 65)
        assert not report.flagged_dataset


class TestUncommonSign:
    def test_single_negative_among_many(self):
        values = np.abs(np.random.default_rng(1).normal(5, 1, 200))
        values[17] = -3.0
        ds = build_dataset(values[:, None], heu=labels_for(200))
        assert det.detect_uncommon_sign(ds).flagged_rows == (17,)

    def test_mixed_signs_unflagged(self):
        values = np.array([-1.0, 1.0] * 20)
        ds = build_dataset(values[:, None], heu=labels_for(40))
        assert det.detect_uncommon_sign(ds).flagged_rows == ()


class TestStubs:
    def test_not_applicable_status(self, tiny_dataset):
        for stub in det.STUBS:
            report = det.not_applicable_report(stub, tiny_dataset)
            assert report.status == "not_applicable"
            assert report.not_applicable_reason


class TestOverlapSummary:
    def test_two_antipatterns_one_row(self):
        ds = build_dataset(np.zeros((5, 1)), heu=labels_for(5))
        reports = [
            det.AntipatternReport(Antipattern.MISLABEL, flagged_rows=(2,), dataset_id="t"),
            det.AntipatternReport(Antipattern.CLASS_OVERLAP, flagged_rows=(2,), dataset_id="t"),
        ]
        summary = det.overlap_summary(reports, ds)
        assert summary.row_histogram == {2: 1}
        assert summary.pair_counts == {("class_overlap", "mislabel"): 1}

    def test_disjoint_findings(self):
        ds = build_dataset(np.zeros((6, 1)), heu=labels_for(6))
        reports = [
            det.AntipatternReport(Antipattern.MISLABEL, flagged_rows=(0, 1), dataset_id="t"),
            det.AntipatternReport(Antipattern.DUPLICATES, flagged_rows=(3,), dataset_id="t"),
        ]
        summary = det.overlap_summary(reports, ds)
        assert summary.row_histogram == {1: 3}
        assert summary.pair_counts == {}

    def test_empty_reports(self, tiny_dataset):
        summary = det.overlap_summary([], tiny_dataset)
        assert summary.row_histogram == {}
        assert summary.column_histogram == {}

    def test_mismatched_dataset(self, tiny_dataset):
        other = det.AntipatternReport(Antipattern.MISLABEL, flagged_rows=(0,), dataset_id="other")
        with pytest.raises(DetectorError):
            det.overlap_summary([other], tiny_dataset)

    def test_column_level_pairs(self):
        ds = build_dataset(np.zeros((5, 3)), heu=labels_for(5))
        reports = [
            det.AntipatternReport(Antipattern.TAILED, flagged_columns=("c0", "c1"), dataset_id="t"),
            det.AntipatternReport(Antipattern.CORR_REDUNDANT, flagged_columns=("c1",), dataset_id="t"),
        ]
        summary = det.overlap_summary(reports, ds)
        assert summary.column_histogram == {1: 1, 2: 1}
        assert summary.pair_counts == {("correlated_redundant", "tailed"): 1}


class TestPlantedDirtyDataset:
    def test_all_plants_recovered(self):
        ds, plants = make_dirty_dataset(123)
        assert det.detect_duplicates(ds).flagged_rows == plants.duplicate_rows
        assert det.detect_constant(ds).flagged_columns == plants.constant_columns
        assert det.detect_mislabels(ds).flagged_rows == plants.mislabel_rows
        from dqa.schema import applicable_rules, check_schema

        rules = applicable_rules(ds, builtin_sdp_rules())
        assert check_schema(ds, rules).all_rows() == plants.schema_violation_rows
        corr = det.detect_correlated_redundant(ds)
        assert len(set(corr.flagged_columns) & set(plants.correlated_pair)) == 1
