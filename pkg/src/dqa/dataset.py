"""Immutable tabular dataset with dual defect labels and per-cell missing mask."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace

import numpy as np

HEURISTIC = "heuristic"
REALISTIC = "realistic"

_TRUE_TOKENS = {"1", "true"}
_FALSE_TOKENS = {"0", "false"}


class DatasetError(ValueError):
    """Raised for malformed input data or invalid dataset operations."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """A numeric feature matrix plus two binary label vectors.

    ``features`` holds NaN wherever ``missing_mask`` is set; every other cell
    is a finite float.  ``active_label`` selects which of the two label
    vectors downstream consumers (splitting, learners, overlap removal) see
    through :meth:`labels`.  ``row_ids`` preserve identity across row
    removals so that cleaning and injection can be audited.

    Instances are immutable; every transformation returns a new Dataset.
    """

    id: str
    feature_names: tuple[str, ...]
    features: np.ndarray
    label_heuristic: np.ndarray
    label_realistic: np.ndarray
    active_label: str = REALISTIC
    missing_mask: np.ndarray | None = None
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        n, f = feats.shape
        if len(self.feature_names) != f:
            raise DatasetError("feature_names length does not match feature count")
        if len(set(self.feature_names)) != f:
            raise DatasetError("duplicate feature names")
        heu = np.asarray(self.label_heuristic, dtype=np.int8)
        real = np.asarray(self.label_realistic, dtype=np.int8)
        if heu.shape != (n,) or real.shape != (n,):
            raise DatasetError("label vectors must match the row count")
        for vec in (heu, real):
            if vec.size and not np.isin(vec, (0, 1)).all():
                raise DatasetError("non-binary label")
        if self.active_label not in (HEURISTIC, REALISTIC):
            raise DatasetError(f"unknown active label {self.active_label!r}")
        mask = self.missing_mask
        mask = np.zeros((n, f), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != (n, f):
            raise DatasetError("missing_mask shape must match features")
        rid = self.row_ids
        rid = np.arange(n, dtype=np.int64) if rid is None else np.asarray(rid, dtype=np.int64)
        if rid.shape != (n,):
            raise DatasetError("row_ids must match the row count")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "label_heuristic", _frozen(heu))
        object.__setattr__(self, "label_realistic", _frozen(real))
        object.__setattr__(self, "missing_mask", _frozen(mask))
        object.__setattr__(self, "row_ids", _frozen(rid))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    # -- basic accessors ---------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def labels(self) -> np.ndarray:
        """The label vector selected by ``active_label``."""
        return self.label_heuristic if self.active_label == HEURISTIC else self.label_realistic

    def col_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DatasetError(f"unknown column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        """Full column including NaN at masked cells."""
        return self.features[:, self.col_index(name)]

    def column_values(self, name: str) -> np.ndarray:
        """Non-missing values of a column."""
        j = self.col_index(name)
        return self.features[~self.missing_mask[:, j], j]

    # -- derived datasets --------------------------------------------------

    def with_active_label(self, which: str) -> "Dataset":
        if which not in (HEURISTIC, REALISTIC):
            raise DatasetError(f"unknown active label {which!r}")
        return replace(self, active_label=which)

    def with_id(self, new_id: str) -> "Dataset":
        return replace(self, id=new_id)

    def take_rows(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            features=self.features[idx],
            label_heuristic=self.label_heuristic[idx],
            label_realistic=self.label_realistic[idx],
            missing_mask=self.missing_mask[idx],
            row_ids=self.row_ids[idx],
        )

    def drop_rows(self, indices) -> "Dataset":
        keep = np.ones(self.n_rows, dtype=bool)
        keep[np.asarray(list(indices), dtype=np.int64)] = False
        return self.take_rows(np.flatnonzero(keep))

    def take_columns(self, names) -> "Dataset":
        cols = [self.col_index(n) for n in names]
        return replace(
            self,
            feature_names=tuple(names),
            features=self.features[:, cols],
            missing_mask=self.missing_mask[:, cols],
        )

    def drop_columns(self, names) -> "Dataset":
        drop = set(names)
        for n in drop:
            self.col_index(n)
        return self.take_columns([n for n in self.feature_names if n not in drop])

    def add_columns(self, names, values: np.ndarray, mask: np.ndarray | None = None) -> "Dataset":
        """Append columns; ``values`` is (n_rows, len(names))."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if values.shape[0] != self.n_rows:
            raise DatasetError("new columns must match the row count")
        for n in names:
            if n in self.feature_names:
                raise DatasetError(f"column {n!r} already exists")
        if mask is None:
            mask = np.isnan(values)
        return replace(
            self,
            feature_names=self.feature_names + tuple(names),
            features=np.hstack([self.features, values]),
            missing_mask=np.hstack([self.missing_mask, mask]),
        )

    def replace_column_values(self, name: str, values: np.ndarray) -> "Dataset":
        j = self.col_index(name)
        feats = self.features.copy()
        feats[:, j] = values
        return replace(self, features=feats)

    def replace_features(self, features: np.ndarray) -> "Dataset":
        return replace(self, features=np.asarray(features, dtype=np.float64))


# -- column statistics -----------------------------------------------------


@dataclass(frozen=True)
class ColumnStats:
    """Plain and tail-trimmed summary statistics of one column.

    Trimming drops ``floor(n * trim_fraction)`` values from each tail, so the
    trimmed statistics discount extreme values at both ends.  Variance and
    standard deviation are population statistics (ddof=0).
    """

    mean: float
    sd: float
    variance: float
    min: float
    max: float
    trimmed_mean: float
    trimmed_sd: float
    trim_fraction: float


def column_stats(ds: Dataset, col: str, trim_fraction: float = 0.10) -> ColumnStats:
    if not 0.0 <= trim_fraction < 0.5:
        raise DatasetError("trim_fraction must be in [0, 0.5)")
    values = ds.column_values(col)
    if values.size == 0:
        raise DatasetError(f"column {col!r} has no non-missing values")
    k = int(math.floor(values.size * trim_fraction))
    trimmed = np.sort(values)[k : values.size - k]
    if trimmed.size == 0:
        raise DatasetError("trimming leaves no values")
    variance = float(np.var(values))
    return ColumnStats(
        mean=float(np.mean(values)),
        sd=float(math.sqrt(variance)),
        variance=variance,
        min=float(np.min(values)),
        max=float(np.max(values)),
        trimmed_mean=float(np.mean(trimmed)),
        trimmed_sd=float(np.std(trimmed)),
        trim_fraction=float(trim_fraction),
    )


# -- CSV input/output --------------------------------------------------------


def _parse_label(token: str, column: str, line: int) -> int:
    t = token.strip().lower()
    if t in _TRUE_TOKENS:
        return 1
    if t in _FALSE_TOKENS:
        return 0
    raise DatasetError(f"non-binary label {token!r} in column {column!r} at data row {line}")


def load_csv(path, heuristic_col: str = "HeuBug", realistic_col: str = "RealBug") -> Dataset:
    """Load a UTF-8 comma-separated file with a header row.

    All columns other than the two label columns are parsed as real-valued
    features.  Cells that fail to parse as a number (including empty cells)
    are recorded in the missing mask and stored as NaN; they are surfaced
    later by the missing-values detector rather than dropped silently.
    """
    if not os.path.exists(path):
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty file") from None
        if len(set(header)) != len(header):
            raise DatasetError("duplicate header names")
        for label_col in (heuristic_col, realistic_col):
            if label_col not in header:
                raise DatasetError(f"missing label column {label_col!r}")
        heu_idx = header.index(heuristic_col)
        real_idx = header.index(realistic_col)
        feat_cols = [j for j in range(len(header)) if j not in (heu_idx, real_idx)]
        names = tuple(header[j] for j in feat_cols)

        rows, heus, reals, masks = [], [], [], []
        for i, record in enumerate(reader):
            if len(record) != len(header):
                raise DatasetError(f"row {i} has {len(record)} cells, expected {len(header)}")
            heus.append(_parse_label(record[heu_idx], heuristic_col, i))
            reals.append(_parse_label(record[real_idx], realistic_col, i))
            vals = np.empty(len(feat_cols))
            miss = np.zeros(len(feat_cols), dtype=bool)
            for k, j in enumerate(feat_cols):
                try:
                    vals[k] = float(record[j])
                    if not math.isfinite(vals[k]):
                        raise ValueError
                except ValueError:
                    vals[k] = np.nan
                    miss[k] = True
            rows.append(vals)
            masks.append(miss)
    if not rows:
        raise DatasetError("zero data rows")
    return Dataset(
        id=os.path.splitext(os.path.basename(path))[0],
        feature_names=names,
        features=np.vstack(rows),
        label_heuristic=np.array(heus, dtype=np.int8),
        label_realistic=np.array(reals, dtype=np.int8),
        active_label=REALISTIC,
        missing_mask=np.vstack(masks),
    )


def format_value(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


def save_csv(ds: Dataset, path, heuristic_col: str = "HeuBug", realistic_col: str = "RealBug") -> None:
    """Write a dataset back to CSV; masked cells become empty strings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [heuristic_col, realistic_col])
        for i in range(ds.n_rows):
            cells = [
                "" if ds.missing_mask[i, j] else format_value(ds.features[i, j])
                for j in range(ds.n_features)
            ]
            writer.writerow(cells + [int(ds.label_heuristic[i]), int(ds.label_realistic[i])])


# -- stratified splitting ----------------------------------------------------


def split_stratified(ds: Dataset, train_fraction: float = 0.8, seed: int = 0):
    """Split rows into train/test keeping the class ratio of the active label.

    Per class, ``floor(count * (1 - train_fraction))`` rows go to the test
    side and the remainder (including the rounding leftover) stays in
    training, which keeps the test-side ratio conservative and the split
    deterministic for a fixed seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError("train_fraction must be in (0, 1)")
    if ds.n_rows < 5:
        raise DatasetError("too few rows to split")
    y = ds.labels()
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if members.size == 0:
            raise DatasetError("single-class dataset cannot be split with stratification")
        # epsilon guards the floor against float artifacts like 20 * 0.2 -> 3.999...
        n_test = int(math.floor(members.size * (1.0 - train_fraction) + 1e-9))
        if n_test < 1 or members.size - n_test < 1:
            raise DatasetError("too few rows to place each class in both splits")
        perm = rng.permutation(members)
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return ds.take_rows(train).with_id(ds.id + ":train"), ds.take_rows(test).with_id(ds.id + ":test")
