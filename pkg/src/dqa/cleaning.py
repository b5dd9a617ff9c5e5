"""The four cleaning steps (Fi/Tr/Mi/Ov), canonical cleaning orders, and the
order-application pipeline with a full audit log.

Step semantics:

* ``Fi`` (filtering) removes schema-violating rows, duplicate rows (keeping
  the first occurrence), constant columns, and correlated & redundant
  columns, in that fixed internal order.
* ``Tr`` (transformation) log-transforms tailed columns and z-scores
  unnormalized columns; a column flagged as both is logged first and then
  z-scored with the post-log statistics.
* ``Mi`` (mislabel correction) switches the active label to the realistic
  vector.
* ``Ov`` (overlap removal) drops the rows flagged by the k-means cluster
  cleaning detector under the currently active label.

Because ``Mi`` only changes which label vector is active and ``Fi``/``Tr``
never read labels, moving ``Mi`` anywhere earlier among the pre-``Ov``
positions (or anywhere after ``Ov``) yields the same result; the 24
permutations therefore collapse to 12 canonical orders.
"""

from __future__ import annotations

import itertools
import warnings
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from dqa import detectors
from dqa.dataset import REALISTIC, Dataset
from dqa.schema import SchemaRule, applicable_rules, builtin_sdp_rules, check_schema

FI, TR, MI, OV = "Fi", "Tr", "Mi", "Ov"
STEPS = (FI, TR, MI, OV)


class CleaningError(ValueError):
    pass


def derive_seed(*parts) -> int:
    """Stable child seed from mixed int/str parts (schedule independent)."""
    ints = [p if isinstance(p, (int, np.integer)) else zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence([int(i) & 0xFFFFFFFF for i in ints]).generate_state(1)[0])


# -- orders ------------------------------------------------------------------------


@dataclass(frozen=True)
class CleaningOrder:
    steps: tuple[str, ...]

    def __post_init__(self):
        if sorted(self.steps) != sorted(STEPS):
            raise CleaningError(f"order must use each of {STEPS} exactly once, got {self.steps}")

    @property
    def name(self) -> str:
        return "".join(self.steps)

    def position(self, step: str) -> int:
        return self.steps.index(step)

    def __str__(self) -> str:
        return self.name


def parse_order(text: str) -> CleaningOrder:
    if len(text) != 8:
        raise CleaningError(f"invalid order string {text!r}")
    steps = tuple(text[i : i + 2] for i in range(0, 8, 2))
    return CleaningOrder(steps=steps)


def canonicalize(order: CleaningOrder) -> CleaningOrder:
    """Representative of the order's equivalence class: Mi moved adjacent to Ov."""
    others = [s for s in order.steps if s != MI]
    ov_at = others.index(OV)
    if order.position(MI) < order.position(OV):
        others.insert(ov_at, MI)
    else:
        others.insert(ov_at + 1, MI)
    return CleaningOrder(steps=tuple(others))


def equivalence_class(order: CleaningOrder) -> tuple[CleaningOrder, ...]:
    """All permutations collapsing to the same canonical representative."""
    canon = canonicalize(order)
    return tuple(
        CleaningOrder(p)
        for p in itertools.permutations(STEPS)
        if canonicalize(CleaningOrder(p)) == canon
    )


def canonical_orders() -> list[CleaningOrder]:
    """The 12 distinct cleaning orders out of the 24 permutations."""
    seen: dict[str, CleaningOrder] = {}
    for perm in itertools.permutations(STEPS):
        canon = canonicalize(CleaningOrder(perm))
        seen.setdefault(canon.name, canon)
    return [seen[name] for name in sorted(seen)]


def subsequence_partition(orders, pair):
    """Split orders by whether step A precedes step B."""
    a, b = pair
    if a == b:
        raise CleaningError("pair must name two distinct steps")
    with_ab = [o for o in orders if o.position(a) < o.position(b)]
    with_ba = [o for o in orders if o.position(b) < o.position(a)]
    return with_ab, with_ba


# -- transform bookkeeping -----------------------------------------------------------

LOG = "log"
ZSCORE = "zscore"
LOG_THEN_ZSCORE = "log_then_zscore"


@dataclass(frozen=True)
class ColumnTransform:
    kind: str
    shift: float = 0.0
    mean: float = 0.0
    sd: float = 1.0

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=float)
        if self.kind in (LOG, LOG_THEN_ZSCORE):
            out = np.log1p(out + self.shift)
        if self.kind in (ZSCORE, LOG_THEN_ZSCORE):
            out = (out - self.mean) / self.sd
        return out

    def without_log(self) -> "ColumnTransform | None":
        if self.kind == LOG_THEN_ZSCORE:
            return replace(self, kind=ZSCORE)
        return None if self.kind == LOG else self

    def without_zscore(self) -> "ColumnTransform | None":
        if self.kind == LOG_THEN_ZSCORE:
            return replace(self, kind=LOG, mean=0.0, sd=1.0)
        return None if self.kind == ZSCORE else self


@dataclass(frozen=True)
class TransformParams:
    """Training-fitted per-column transforms plus the surviving column set."""

    fitted: dict[str, ColumnTransform] = field(default_factory=dict)
    final_columns: tuple[str, ...] | None = None

    def to_json_dict(self) -> dict:
        out = {
            col: {"kind": t.kind, "shift": t.shift, "mean": t.mean, "sd": t.sd}
            for col, t in self.fitted.items()
        }
        return {"columns": out, "final_columns": list(self.final_columns or ())}


@dataclass(frozen=True)
class ColumnArtifact:
    """Removed/raw column values keyed by row identity, for later restoration."""

    names: tuple[str, ...]
    values: np.ndarray  # (rows_at_capture, len(names))
    row_ids: np.ndarray

    def values_for(self, row_ids: np.ndarray) -> np.ndarray:
        index = {int(r): i for i, r in enumerate(self.row_ids)}
        try:
            picks = [index[int(r)] for r in row_ids]
        except KeyError as exc:
            raise CleaningError(f"row id {exc} missing from captured column values") from None
        return self.values[picks]


# -- audit log -------------------------------------------------------------------------


@dataclass
class StepLog:
    step: str
    removed_rows: dict[str, Dataset] = field(default_factory=dict)
    removed_columns: dict[str, ColumnArtifact] = field(default_factory=dict)
    label_switched: bool = False
    transform: TransformParams | None = None
    pre_transform: ColumnArtifact | None = None

    def to_json_dict(self) -> dict:
        return {
            "step": self.step,
            "rows_removed": {
                reason: [int(r) for r in slice_.row_ids] for reason, slice_ in self.removed_rows.items()
            },
            "columns_removed": {reason: list(a.names) for reason, a in self.removed_columns.items()},
            "label_switched": self.label_switched,
            "transform": self.transform.to_json_dict() if self.transform else None,
        }


@dataclass
class CleaningLog:
    order: str
    steps: list[StepLog] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"order": self.order, "steps": [s.to_json_dict() for s in self.steps]}

    def step(self, name: str) -> StepLog | None:
        for s in self.steps:
            if s.step == name:
                return s
        return None


# -- cleaning parameters ------------------------------------------------------------------


def _default_rules() -> tuple[SchemaRule, ...]:
    return tuple(builtin_sdp_rules())


@dataclass(frozen=True)
class CleaningParams:
    rules: tuple[SchemaRule, ...] = field(default_factory=_default_rules)
    eq_tolerance: float = 1e-9
    tailed_threshold: float = detectors.DEFAULT_TAILED_THRESHOLD
    z_threshold: float = detectors.DEFAULT_UNNORMALIZED_Z
    rho_threshold: float = detectors.DEFAULT_RHO_THRESHOLD
    r2_threshold: float = detectors.DEFAULT_R2_THRESHOLD
    overlap_k: int | None = None
    overlap_p: float | None = None


def _guard_rows(ds: Dataset, step: str) -> None:
    if ds.n_rows == 0:
        raise CleaningError(f"{step} removed every row")
    y = ds.labels()
    if len(np.unique(y)) < 2:
        raise CleaningError(f"{step} eliminated a class")


def _column_artifact(ds: Dataset, names) -> ColumnArtifact:
    cols = [ds.col_index(n) for n in names]
    return ColumnArtifact(
        names=tuple(names),
        values=ds.features[:, cols].copy(),
        row_ids=ds.row_ids.copy(),
    )


# -- the four steps --------------------------------------------------------------------------


def step_filter(ds: Dataset, params: CleaningParams = CleaningParams()) -> tuple[Dataset, StepLog]:
    """Remove schema violations, duplicates, constant columns, and
    correlated & redundant columns, in that fixed order."""
    log = StepLog(step=FI)

    rules = applicable_rules(ds, params.rules)
    report = check_schema(ds, rules, params.eq_tolerance)
    rows = list(report.all_rows())
    if rows:
        log.removed_rows["schema_violation"] = ds.take_rows(rows)
        ds = ds.drop_rows(rows)
        _guard_rows(ds, "schema filtering")

    dup = detectors.detect_duplicates(ds)
    if dup.flagged_rows:
        log.removed_rows["duplicates"] = ds.take_rows(list(dup.flagged_rows))
        ds = ds.drop_rows(list(dup.flagged_rows))
        _guard_rows(ds, "duplicate filtering")

    const = detectors.detect_constant(ds)
    if const.flagged_columns:
        log.removed_columns["constant"] = _column_artifact(ds, const.flagged_columns)
        ds = ds.drop_columns(const.flagged_columns)
        if ds.n_features == 0:
            raise CleaningError("constant-column filtering removed every column")

    if ds.n_features >= 2 and ds.n_rows >= 3:
        corr = detectors.detect_correlated_redundant(ds, params.rho_threshold, params.r2_threshold)
        if corr.flagged_columns:
            log.removed_columns["correlated_redundant"] = _column_artifact(ds, corr.flagged_columns)
            ds = ds.drop_columns(corr.flagged_columns)
            if ds.n_features == 0:
                raise CleaningError("correlation filtering removed every column")
    return ds, log


def step_transform(ds: Dataset, params: CleaningParams = CleaningParams()) -> tuple[Dataset, StepLog]:
    """Log-transform tailed columns and z-score unnormalized columns.

    Columns with negative values are shifted by -min before log1p and the
    shift is recorded.  Z-scoring uses the column's own mean/sd, computed on
    the post-log values when the column is also tailed, so the transformed
    training column comes out standardized.
    """
    log = StepLog(step=TR)
    tailed: tuple[str, ...] = ()
    unnormalized: tuple[str, ...] = ()
    if ds.n_rows >= 3:
        tailed = detectors.detect_tailed(ds, params.tailed_threshold).flagged_columns
        if ds.n_features >= 2:
            unnormalized = detectors.detect_unnormalized(ds, params.z_threshold).flagged_columns

    touched = [n for n in ds.feature_names if n in set(tailed) | set(unnormalized)]
    fitted: dict[str, ColumnTransform] = {}
    if touched:
        log.pre_transform = _column_artifact(ds, touched)
    features = ds.features.copy()
    for name in touched:
        j = ds.col_index(name)
        ok = ~ds.missing_mask[:, j]
        raw = features[ok, j]
        is_tailed, is_unnorm = name in tailed, name in unnormalized
        shift = 0.0
        values = raw
        if is_tailed:
            lo = float(raw.min())
            shift = -lo if lo < 0 else 0.0
            values = np.log1p(raw + shift)
        if is_unnorm:
            mean, sd = float(values.mean()), float(values.std())
            if sd == 0.0:
                warnings.warn(f"column {name!r} has zero deviation; z-scoring skipped", stacklevel=2)
                if not is_tailed:
                    continue
                transform = ColumnTransform(LOG, shift=shift)
            else:
                kind = LOG_THEN_ZSCORE if is_tailed else ZSCORE
                transform = ColumnTransform(kind, shift=shift, mean=mean, sd=sd)
        else:
            transform = ColumnTransform(LOG, shift=shift)
        fitted[name] = transform
        features[ok, j] = transform.apply(raw)
    tp = TransformParams(fitted=fitted)
    log.transform = tp
    return ds.replace_features(features), log


def step_mislabel(ds: Dataset) -> tuple[Dataset, StepLog]:
    """Switch the active label to the realistic vector."""
    log = StepLog(step=MI, label_switched=ds.active_label != REALISTIC)
    return ds.with_active_label(REALISTIC), log


def step_overlap(ds: Dataset, params: CleaningParams = CleaningParams(), seed: int = 0) -> tuple[Dataset, StepLog]:
    """Remove the rows flagged as class overlap under the current active label."""
    report = detectors.detect_class_overlap_ikmcca(ds, params.overlap_k, params.overlap_p, seed)
    log = StepLog(step=OV)
    if report.flagged_rows:
        log.removed_rows["class_overlap"] = ds.take_rows(list(report.flagged_rows))
        ds = ds.drop_rows(list(report.flagged_rows))
        _guard_rows(ds, "overlap removal")
    return ds, log


def clean(
    ds: Dataset,
    order: CleaningOrder,
    params: CleaningParams = CleaningParams(),
    seed: int = 0,
) -> tuple[Dataset, CleaningLog, TransformParams]:
    """Apply an order's steps in sequence, each seeing the previous output.

    The overlap step's RNG seed is derived from the master seed and the step
    name only, never from the step's position, so orders in the same
    equivalence class produce byte-identical outputs.
    """
    log = CleaningLog(order=order.name)
    tp = TransformParams()
    for step in order.steps:
        if step == FI:
            ds, step_log = step_filter(ds, params)
        elif step == TR:
            ds, step_log = step_transform(ds, params)
            tp = step_log.transform or tp
        elif step == MI:
            ds, step_log = step_mislabel(ds)
        else:
            ds, step_log = step_overlap(ds, params, seed=derive_seed(seed, OV))
        log.steps.append(step_log)
    surviving = {name: t for name, t in tp.fitted.items() if name in ds.feature_names}
    tp = TransformParams(fitted=surviving, final_columns=tuple(ds.feature_names))
    return ds, log, tp


def apply_transform_to_test(test: Dataset, params: TransformParams) -> Dataset:
    """Apply training-fitted transforms to a test set and keep only the
    training pipeline's surviving columns."""
    features = test.features.copy()
    for name, transform in params.fitted.items():
        j = test.col_index(name)
        ok = ~test.missing_mask[:, j]
        features[ok, j] = transform.apply(features[ok, j])
    out = test.replace_features(features)
    if params.final_columns is not None:
        for name in params.final_columns:
            out.col_index(name)
        out = out.take_columns(list(params.final_columns))
    return out
