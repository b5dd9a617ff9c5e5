"""One detection operation per data-quality antipattern, plus overlap analysis.

Detectors are pure functions over an immutable :class:`~dqa.dataset.Dataset`;
each returns an :class:`AntipatternReport` with row-level findings,
column-level findings, or a dataset-level scalar, depending on where the
antipattern lives.  Taxonomy entries that have no realization on purely
numeric tables (data miscoding, inconsistent representation, uncommon list
length, inconsistent labeling) are kept as stubs reporting "not applicable"
so a lint report always covers the full taxonomy.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform
from scipy.stats import rankdata

from dqa.dataset import Dataset, column_stats
from dqa.schema import check_schema

EPS = 1e-12

DEFAULT_TAILED_THRESHOLD = 0.25
DEFAULT_UNNORMALIZED_Z = 3.0
DEFAULT_DRIFT_JSD = 0.10
DEFAULT_DRIFT_BINS = 20
DEFAULT_IMBALANCE_THRESHOLD = 0.10
DEFAULT_ROW_FEATURE_RATIO = 10.0
DEFAULT_RHO_THRESHOLD = 0.7
DEFAULT_R2_THRESHOLD = 0.9


class DetectorError(ValueError):
    pass


class Antipattern(str, enum.Enum):
    SCHEMA_VIOLATION = "schema_violation"
    DUPLICATES = "duplicates"
    MISSING = "missing_values"
    TAILED = "tailed"
    UNNORMALIZED = "unnormalized"
    CONSTANT = "constant_features"
    DRIFT = "data_drift"
    CLASS_IMBALANCE = "class_imbalance"
    CLASS_OVERLAP = "class_overlap"
    MISLABEL = "mislabel"
    CORR_REDUNDANT = "correlated_redundant"
    ROW_FEATURE_IMBALANCE = "row_feature_imbalance"
    UNCOMMON_SIGN = "uncommon_sign"
    # stubs: no realization on numeric-only tables
    DATA_MISCODING = "data_miscoding"
    INCONSISTENT_REPRESENTATION = "inconsistent_representation"
    UNCOMMON_LIST_LENGTH = "uncommon_list_length"
    INCONSISTENT_LABELING = "inconsistent_labeling"


ROW_LEVEL = frozenset(
    {
        Antipattern.SCHEMA_VIOLATION,
        Antipattern.DUPLICATES,
        Antipattern.MISSING,
        Antipattern.MISLABEL,
        Antipattern.CLASS_OVERLAP,
        Antipattern.UNCOMMON_SIGN,
    }
)
COLUMN_LEVEL = frozenset(
    {
        Antipattern.TAILED,
        Antipattern.UNNORMALIZED,
        Antipattern.CONSTANT,
        Antipattern.DRIFT,
        Antipattern.CORR_REDUNDANT,
    }
)
DATASET_LEVEL = frozenset({Antipattern.CLASS_IMBALANCE, Antipattern.ROW_FEATURE_IMBALANCE})
STUBS = frozenset(
    {
        Antipattern.DATA_MISCODING,
        Antipattern.INCONSISTENT_REPRESENTATION,
        Antipattern.UNCOMMON_LIST_LENGTH,
        Antipattern.INCONSISTENT_LABELING,
    }
)


@dataclass(frozen=True)
class AntipatternReport:
    antipattern: Antipattern
    flagged_rows: tuple[int, ...] = ()
    flagged_columns: tuple[str, ...] = ()
    scalar: float | None = None
    flagged_dataset: bool = False
    dataset_id: str = ""
    params: tuple = ()
    not_applicable_reason: str | None = None

    @property
    def status(self) -> str:
        if self.not_applicable_reason is not None:
            return "not_applicable"
        if self.flagged_rows or self.flagged_columns or self.flagged_dataset:
            return "flagged"
        return "clean"

    def to_json_dict(self) -> dict:
        out = {
            "antipattern": self.antipattern.value,
            "status": self.status,
            "flagged_rows": list(self.flagged_rows),
            "flagged_columns": list(self.flagged_columns),
            "scalar": self.scalar,
            "params": dict(self.params),
        }
        if self.not_applicable_reason is not None:
            out["reason"] = self.not_applicable_reason
        return out


def _report(antipattern, ds, rows=(), columns=(), scalar=None, flagged=False, params=()):
    return AntipatternReport(
        antipattern=antipattern,
        flagged_rows=tuple(sorted(int(i) for i in rows)),
        flagged_columns=tuple(sorted(columns)),
        scalar=scalar,
        flagged_dataset=flagged,
        dataset_id=ds.id,
        params=tuple(params),
    )


# -- distribution antipatterns ------------------------------------------------------


def detect_tailed(ds: Dataset, deviation_threshold: float = DEFAULT_TAILED_THRESHOLD) -> AntipatternReport:
    """Columns whose mean is pulled far away from the 10%-trimmed mean.

    The deviation is standardized by the trimmed standard deviation, so a
    handful of extreme values in an otherwise tight column produces a very
    large score.
    """
    if ds.n_rows == 0 or ds.n_features == 0:
        raise DetectorError("empty dataset")
    flagged = []
    for name in ds.feature_names:
        values = ds.column_values(name)
        if values.size < 3:
            raise DetectorError(f"column {name!r} needs at least 3 non-missing values")
        stats = column_stats(ds, name)
        deviation = abs(stats.mean - stats.trimmed_mean) / max(stats.trimmed_sd, EPS)
        if deviation > deviation_threshold:
            flagged.append(name)
    return _report(
        Antipattern.TAILED, ds, columns=flagged, params=(("deviation_threshold", deviation_threshold),)
    )


def detect_unnormalized(ds: Dataset, z_threshold: float = DEFAULT_UNNORMALIZED_Z) -> AntipatternReport:
    """Columns whose scale or location is an outlier relative to the other columns.

    Each column's trimmed mean and trimmed standard deviation are z-scored
    against the cross-column distribution of trimmed means and trimmed
    deviations (trimming makes the comparison robust to the tails that the
    tailed detector owns); a column exceeding the threshold on either axis is
    flagged.  Identical columns give exactly zero deviations and never flag.
    """
    if ds.n_features < 2:
        raise DetectorError("cross-column z-scores need at least 2 columns")
    stats = {}
    for name in ds.feature_names:
        if ds.column_values(name).size < 3:
            raise DetectorError(f"column {name!r} needs at least 3 non-missing values")
        stats[name] = column_stats(ds, name)
    trimmed_means = np.array([s.trimmed_mean for s in stats.values()])
    trimmed_sds = np.array([s.trimmed_sd for s in stats.values()])
    center_m, scale_m = trimmed_means.mean(), trimmed_means.std()
    center_s, scale_s = trimmed_sds.mean(), trimmed_sds.std()
    flagged = []
    for name, s in stats.items():
        z_mean = abs(s.trimmed_mean - center_m) / max(scale_m, EPS)
        z_sd = abs(s.trimmed_sd - center_s) / max(scale_s, EPS)
        if z_mean > z_threshold or z_sd > z_threshold:
            flagged.append(name)
    return _report(Antipattern.UNNORMALIZED, ds, columns=flagged, params=(("z_threshold", z_threshold),))


def detect_constant(ds: Dataset) -> AntipatternReport:
    """Columns with zero variance over their non-missing cells."""
    flagged = []
    for name in ds.feature_names:
        values = ds.column_values(name)
        if values.size and values.min() == values.max():
            flagged.append(name)
    return _report(Antipattern.CONSTANT, ds, columns=flagged)


def _jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    """Base-2 Jensen-Shannon divergence of two discrete distributions (in [0, 1])."""
    m = 0.5 * (p + q)

    def kl(x):
        nz = x > 0
        return float(np.sum(x[nz] * np.log2(x[nz] / m[nz])))

    return 0.5 * kl(p) + 0.5 * kl(q)


def drift_divergences(ds_a: Dataset, ds_b: Dataset, bins: int = DEFAULT_DRIFT_BINS) -> dict[str, float]:
    """Per-column JSD between two datasets, histogrammed over their joint range."""
    if ds_a.feature_names != ds_b.feature_names:
        raise DetectorError("feature names differ between datasets")
    out = {}
    for name in ds_a.feature_names:
        va, vb = ds_a.column_values(name), ds_b.column_values(name)
        if va.size == 0 or vb.size == 0:
            raise DetectorError(f"column {name!r} is empty in one dataset")
        lo = min(va.min(), vb.min())
        hi = max(va.max(), vb.max())
        if lo == hi:
            out[name] = 0.0
            continue
        edges = np.linspace(lo, hi, bins + 1)
        pa, _ = np.histogram(va, bins=edges)
        pb, _ = np.histogram(vb, bins=edges)
        out[name] = _jensen_shannon(pa / pa.sum(), pb / pb.sum())
    return out


def detect_drift(
    ds_a: Dataset,
    ds_b: Dataset,
    js_threshold: float = DEFAULT_DRIFT_JSD,
    bins: int = DEFAULT_DRIFT_BINS,
) -> AntipatternReport:
    """Columns whose distributions diverge between two dataset snapshots."""
    divergences = drift_divergences(ds_a, ds_b, bins)
    flagged = [name for name, jsd in divergences.items() if jsd > js_threshold]
    return _report(
        Antipattern.DRIFT,
        ds_a,
        columns=flagged,
        params=(("js_threshold", js_threshold), ("bins", bins)),
    )


# -- packaging antipatterns -----------------------------------------------------------


def detect_duplicates(ds: Dataset) -> AntipatternReport:
    """Rows whose feature vector is bit-identical to an earlier row (labels ignored)."""
    seen: dict[bytes, int] = {}
    flagged = []
    for i in range(ds.n_rows):
        key = ds.features[i].tobytes()
        if key in seen:
            flagged.append(i)
        else:
            seen[key] = i
    return _report(Antipattern.DUPLICATES, ds, rows=flagged)


def detect_missing(ds: Dataset) -> AntipatternReport:
    """Rows containing at least one masked cell; scalar counts all masked cells."""
    rows = np.flatnonzero(ds.missing_mask.any(axis=1))
    return _report(Antipattern.MISSING, ds, rows=rows, scalar=float(ds.missing_mask.sum()))


# -- label antipatterns -----------------------------------------------------------------


def detect_class_imbalance(ds: Dataset, threshold: float = DEFAULT_IMBALANCE_THRESHOLD) -> AntipatternReport:
    """Minority-class share under the active label; flagged when strictly below threshold."""
    if ds.n_rows < 1:
        raise DetectorError("empty dataset")
    y = ds.labels()
    ones = int(y.sum())
    minority = min(ones, ds.n_rows - ones)
    ratio = minority / ds.n_rows
    return _report(
        Antipattern.CLASS_IMBALANCE,
        ds,
        scalar=ratio,
        flagged=ratio < threshold,
        params=(("threshold", threshold),),
    )


def detect_mislabels(ds: Dataset) -> AntipatternReport:
    """Rows on which the two labeling strategies disagree."""
    rows = np.flatnonzero(ds.label_heuristic != ds.label_realistic)
    return _report(Antipattern.MISLABEL, ds, rows=rows, scalar=rows.size / max(ds.n_rows, 1))


def default_overlap_k(n_rows: int) -> int:
    return max(2, int(round(math.sqrt(n_rows / 2.0))))


def _zscore_columns(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (x - mean) / sd


def kmeans_lloyd(x: np.ndarray, k: int, seed: int, max_iter: int = 300, tol: float = 1e-9):
    """Plain Lloyd iteration with k-means++ seeding; deterministic per seed.

    Returns (assignments, centers, converged).  An emptied cluster is
    reseeded to the point farthest from its assigned center.
    """
    n = x.shape[0]
    if k < 1 or k > n:
        raise DetectorError(f"k={k} out of range for {n} rows")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = np.full(n, np.inf)
    for c in range(1, k):
        dist = ((x - centers[c - 1]) ** 2).sum(axis=1)
        closest = np.minimum(closest, dist)
        total = closest.sum()
        if total <= 0:
            centers[c] = x[rng.integers(n)]
            continue
        centers[c] = x[rng.choice(n, p=closest / total)]

    assign = np.zeros(n, dtype=np.int64)
    converged = False
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = assign == c
            if members.any():
                new_centers[c] = x[members].mean(axis=0)
            else:
                new_centers[c] = x[d2[np.arange(n), assign].argmax()]
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        if shift < tol:
            converged = True
            break
    if not converged:
        warnings.warn("k-means did not converge; using last assignment", stacklevel=2)
    return assign, centers, converged


def detect_class_overlap_ikmcca(
    ds: Dataset,
    k: int | None = None,
    p: float | None = None,
    seed: int = 0,
) -> AntipatternReport:
    """Overlapping-class rows via k-means cluster cleaning.

    Features are z-scored internally and clustered with k-means.  Within each
    cluster, when the defective fraction falls below ``p`` the cluster's
    defective rows are treated as intruders and flagged; otherwise its
    non-defective rows are flagged.  Defaults: ``k = max(2, round(sqrt(n/2)))``
    and ``p`` equal to the overall defective ratio under the active label.
    """
    y = ds.labels()
    if len(np.unique(y)) < 2:
        raise DetectorError("single-class dataset")
    if not np.isfinite(np.where(ds.missing_mask, 0.0, ds.features)).all():
        raise DetectorError("features must be finite")
    # rows with masked cells cannot be placed in feature space; skip them
    complete = np.flatnonzero(~ds.missing_mask.any(axis=1))
    if complete.size == 0:
        raise DetectorError("no complete rows to cluster")
    if k is None:
        k = default_overlap_k(int(complete.size))
    if p is None:
        p = float(y.mean())
    if k < 1 or k > complete.size:
        raise DetectorError(f"k={k} out of range for {complete.size} complete rows")
    if not 0.0 < p < 1.0:
        raise DetectorError("p must be in (0, 1)")

    assign, _, _ = kmeans_lloyd(_zscore_columns(ds.features[complete]), k, seed)
    y_complete = y[complete]
    flagged: list[int] = []
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if members.size == 0:
            continue
        defective = members[y_complete[members] == 1]
        if defective.size / members.size < p:
            flagged.extend(complete[defective].tolist())
        else:
            flagged.extend(complete[members[y_complete[members] == 0]].tolist())
    report = _report(
        Antipattern.CLASS_OVERLAP, ds, rows=flagged, params=(("k", k), ("p", p), ("seed", seed))
    )
    keep = np.ones(ds.n_rows, dtype=bool)
    keep[list(report.flagged_rows)] = False
    if keep.any() and len(np.unique(y[keep])) < 2 and report.flagged_rows:
        warnings.warn("overlap removal would eliminate an entire class", stacklevel=2)
    return report


# -- schema / structure -------------------------------------------------------------------


def detect_schema_violations(ds: Dataset, rules, eq_tolerance: float = 1e-9) -> AntipatternReport:
    violation_report = check_schema(ds, rules, eq_tolerance)
    return _report(
        Antipattern.SCHEMA_VIOLATION,
        ds,
        rows=violation_report.all_rows(),
        scalar=float(violation_report.total_violating_rows),
    )


def detect_row_feature_imbalance(ds: Dataset, min_ratio: float = DEFAULT_ROW_FEATURE_RATIO) -> AntipatternReport:
    """Rows-per-column ratio; flagged when strictly below the rule-of-thumb 10."""
    if ds.n_features < 1:
        raise DetectorError("dataset has no columns")
    ratio = ds.n_rows / ds.n_features
    return _report(
        Antipattern.ROW_FEATURE_IMBALANCE,
        ds,
        scalar=ratio,
        flagged=ratio < min_ratio,
        params=(("min_ratio", min_ratio),),
    )


# -- correlation & redundancy -----------------------------------------------------------


def _spearman_abs_matrix(ds: Dataset, names) -> np.ndarray:
    cols = []
    for name in names:
        j = ds.col_index(name)
        col = ds.features[:, j].copy()
        mask = ds.missing_mask[:, j]
        col[mask] = np.nan
        cols.append(col)
    x = np.column_stack(cols)
    n_cols = x.shape[1]
    rho = np.eye(n_cols)
    for i in range(n_cols):
        for j in range(i + 1, n_cols):
            ok = ~np.isnan(x[:, i]) & ~np.isnan(x[:, j])
            a = rankdata(x[ok, i])
            b = rankdata(x[ok, j])
            sa, sb = a.std(), b.std()
            r = 0.0 if sa == 0 or sb == 0 else float(np.corrcoef(a, b)[0, 1])
            rho[i, j] = rho[j, i] = r
    return np.abs(rho)


def _r_squared(y: np.ndarray, x: np.ndarray) -> float:
    design = np.column_stack([np.ones(len(y)), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= 0:
        return 0.0
    return 1.0 - float((residual**2).sum()) / ss_tot


def detect_correlated_redundant(
    ds: Dataset,
    rho_threshold: float = DEFAULT_RHO_THRESHOLD,
    r2_threshold: float = DEFAULT_R2_THRESHOLD,
) -> AntipatternReport:
    """Two-pass feature screening: Spearman clusters, then OLS redundancy.

    Pass 1 clusters columns by 1 - |rho| with complete linkage and keeps, per
    multi-member cluster, the column least correlated with everything outside
    the cluster.  Pass 2 repeatedly drops the surviving column most
    predictable (highest R^2) from the other survivors until every R^2 is
    below the threshold.  Flagged columns are the union of both passes.
    """
    if ds.n_features < 2:
        raise DetectorError("need at least 2 columns")
    if ds.n_rows < 3:
        raise DetectorError("need at least 3 rows")
    constant = set(detect_constant(ds).flagged_columns)
    if constant:
        warnings.warn(f"excluding constant columns from correlation: {sorted(constant)}", stacklevel=2)
    names = [n for n in ds.feature_names if n not in constant]
    flagged: set[str] = set()
    if len(names) >= 2:
        rho = _spearman_abs_matrix(ds, names)
        distance = 1.0 - rho
        np.fill_diagonal(distance, 0.0)
        link = linkage(squareform(distance, checks=False), method="complete")
        cluster_ids = fcluster(link, t=1.0 - rho_threshold, criterion="distance")
        for cid in np.unique(cluster_ids):
            members = np.flatnonzero(cluster_ids == cid)
            if members.size < 2:
                continue
            outside = np.flatnonzero(cluster_ids != cid)
            if outside.size:
                score = rho[np.ix_(members, outside)].mean(axis=1)
            else:
                # the cluster spans every column; fall back to in-cluster correlation
                score = np.array([rho[m, members].sum() - 1.0 for m in members]) / (members.size - 1)
            keep = members[int(np.argmin(score))]
            flagged.update(names[m] for m in members if m != keep)

    survivors = [n for n in names if n not in flagged]
    while len(survivors) >= 2:
        complete = ~ds.missing_mask[:, [ds.col_index(n) for n in survivors]].any(axis=1)
        data = ds.features[np.ix_(np.flatnonzero(complete), [ds.col_index(n) for n in survivors])]
        r2 = np.array(
            [
                _r_squared(data[:, j], np.delete(data, j, axis=1))
                for j in range(len(survivors))
            ]
        )
        worst = int(np.argmax(r2))
        if r2[worst] < r2_threshold:
            break
        flagged.add(survivors[worst])
        survivors.pop(worst)

    return _report(
        Antipattern.CORR_REDUNDANT,
        ds,
        columns=flagged,
        params=(("rho_threshold", rho_threshold), ("r2_threshold", r2_threshold)),
    )


# -- sign outliers and taxonomy stubs -----------------------------------------------------


def detect_uncommon_sign(ds: Dataset, majority: float = 0.99) -> AntipatternReport:
    """Rows whose sign differs from a >= 99% majority sign of that column."""
    flagged: set[int] = set()
    for j, name in enumerate(ds.feature_names):
        ok = ~ds.missing_mask[:, j]
        values = ds.features[ok, j]
        if values.size == 0:
            continue
        signs = np.sign(values)
        kinds, counts = np.unique(signs, return_counts=True)
        top = int(np.argmax(counts))
        if counts[top] / values.size >= majority and counts[top] != values.size:
            bad = np.flatnonzero(ok)[signs != kinds[top]]
            flagged.update(int(i) for i in bad)
    return _report(Antipattern.UNCOMMON_SIGN, ds, rows=flagged, params=(("majority", majority),))


_STUB_REASONS = {
    Antipattern.DATA_MISCODING: "all features are parsed as numeric; type assignment cannot drift",
    Antipattern.INCONSISTENT_REPRESENTATION: "no string/categorical features to normalize",
    Antipattern.UNCOMMON_LIST_LENGTH: "cells are scalars, not lists",
    Antipattern.INCONSISTENT_LABELING: "labels come from two fixed strategies; per-labeler splits unavailable",
}


def not_applicable_report(antipattern: Antipattern, ds: Dataset) -> AntipatternReport:
    return AntipatternReport(
        antipattern=antipattern,
        dataset_id=ds.id,
        not_applicable_reason=_STUB_REASONS[antipattern],
    )


# -- overlap summary ------------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapSummary:
    """How often findings co-occur on the same row or column.

    Histograms count rows/columns by how many antipatterns flag them (entities
    with zero findings are excluded); pair counts cover entities flagged by
    exactly two antipatterns.
    """

    row_histogram: dict[int, int]
    column_histogram: dict[int, int]
    pair_counts: dict[tuple[str, str], int]

    def to_json_dict(self) -> dict:
        return {
            "row_histogram": {str(k): v for k, v in sorted(self.row_histogram.items())},
            "column_histogram": {str(k): v for k, v in sorted(self.column_histogram.items())},
            "pair_counts": {f"{a}+{b}": v for (a, b), v in sorted(self.pair_counts.items())},
        }


def overlap_summary(reports, ds: Dataset) -> OverlapSummary:
    reports = [r for r in reports if r.not_applicable_reason is None]
    for r in reports:
        if r.dataset_id != ds.id:
            raise DetectorError(f"report for {r.dataset_id!r} does not match dataset {ds.id!r}")

    def tally(level, keys_of):
        counts: dict = {}
        for r in reports:
            if r.antipattern not in level:
                continue
            for key in keys_of(r):
                counts.setdefault(key, []).append(r.antipattern.value)
        histogram: dict[int, int] = {}
        pairs: dict[tuple[str, str], int] = {}
        for hits in counts.values():
            histogram[len(hits)] = histogram.get(len(hits), 0) + 1
            if len(hits) == 2:
                pair = tuple(sorted(hits))
                pairs[pair] = pairs.get(pair, 0) + 1
        return histogram, pairs

    row_hist, row_pairs = tally(ROW_LEVEL, lambda r: r.flagged_rows)
    col_hist, col_pairs = tally(COLUMN_LEVEL, lambda r: r.flagged_columns)
    pair_counts = dict(row_pairs)
    for pair, count in col_pairs.items():
        pair_counts[pair] = pair_counts.get(pair, 0) + count
    return OverlapSummary(row_histogram=row_hist, column_histogram=col_hist, pair_counts=pair_counts)
