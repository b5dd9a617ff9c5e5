"""Clean-baseline construction and one-at-a-time antipattern injection.

The baseline is the fixed pipeline Fi -> Tr -> Mi -> Ov; while it runs, every
removal is captured (schema-violating rows, duplicate rows, constant and
correlated columns, pre-transform column values, overlap rows) so each
antipattern can later be re-introduced in isolation:

* row-based (schema violations, duplicates, class overlap): the captured rows
  come back and an equal number of randomly chosen clean rows leaves, keeping
  the row count identical to the baseline;
* column-based (constant, correlated & redundant): the captured columns are
  appended with their raw values;
* withheld transforms (tailed, unnormalized): the baseline is rebuilt with
  the log (respectively z-score) component of the fitted transforms undone;
* mislabel: the baseline is trained with the heuristic labels active while
  evaluation stays on the realistic labels;
* class imbalance: the baseline's minority class is undersampled to a target
  ratio (total size shrinks; removal alone cannot keep it constant).

Rows captured before the transformation step re-enter with the baseline's
fitted transforms applied, so they differ from clean rows only by the
antipattern that defined them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from dqa.cleaning import (
    FI,
    MI,
    OV,
    TR,
    CleaningLog,
    CleaningParams,
    ColumnArtifact,
    TransformParams,
    apply_transform_to_test,
    derive_seed,
    step_filter,
    step_mislabel,
    step_overlap,
    step_transform,
)
from dqa.dataset import HEURISTIC, Dataset, split_stratified
from dqa.detectors import Antipattern

INJECTABLE = (
    Antipattern.TAILED,
    Antipattern.UNNORMALIZED,
    Antipattern.CONSTANT,
    Antipattern.DUPLICATES,
    Antipattern.SCHEMA_VIOLATION,
    Antipattern.CORR_REDUNDANT,
    Antipattern.MISLABEL,
    Antipattern.CLASS_OVERLAP,
)
ROW_BASED = (Antipattern.SCHEMA_VIOLATION, Antipattern.DUPLICATES, Antipattern.CLASS_OVERLAP)
COLUMN_BASED = (Antipattern.CONSTANT, Antipattern.CORR_REDUNDANT)
CLEAN_CONDITION = "clean"

_DILUTION_WARN_FRACTION = 0.30


class InjectionError(ValueError):
    pass


@dataclass(frozen=True)
class RowArtifact:
    rows: Dataset
    transformed: bool  # whether features already carry the baseline transforms


@dataclass
class CleanBaseline:
    """FTMO-cleaned training data plus everything removed along the way."""

    dataset: Dataset
    transform_params: TransformParams
    row_artifacts: dict[Antipattern, RowArtifact]
    column_artifacts: dict[Antipattern, ColumnArtifact]
    pre_transform: ColumnArtifact | None
    source_imbalance: float
    log: CleaningLog

    def spec_for(self, antipattern: Antipattern, seed: int) -> "InjectionSpec":
        if antipattern not in INJECTABLE:
            raise InjectionError(f"{antipattern.value} is not an injectable antipattern")
        return InjectionSpec(
            antipattern=antipattern,
            seed=seed,
            rows=self.row_artifacts.get(antipattern),
            columns=self.column_artifacts.get(antipattern),
            pre_transform=self.pre_transform,
            transform_params=self.transform_params,
        )


@dataclass(frozen=True)
class InjectionSpec:
    """Everything needed to restore one antipattern into a clean baseline."""

    antipattern: Antipattern
    seed: int
    rows: RowArtifact | None = None
    columns: ColumnArtifact | None = None
    pre_transform: ColumnArtifact | None = None
    transform_params: TransformParams | None = None
    target_imbalance: float | None = None


def make_clean_baseline(
    ds: Dataset, params: CleaningParams = CleaningParams(), seed: int = 0
) -> CleanBaseline:
    """Run Fi -> Tr -> Mi -> Ov and capture per-antipattern artifacts.

    The step sequence and per-step seeds match ``clean()`` with the FiTrMiOv
    order exactly, so the baseline dataset is byte-identical to that path.
    """
    source_imbalance = float(min(ds.label_realistic.mean(), 1.0 - ds.label_realistic.mean()))
    log = CleaningLog(order="FiTrMiOv")

    ds1, fi_log = step_filter(ds, params)
    log.steps.append(fi_log)
    ds2, tr_log = step_transform(ds1, params)
    log.steps.append(tr_log)
    ds3, mi_log = step_mislabel(ds2)
    log.steps.append(mi_log)
    ds4, ov_log = step_overlap(ds3, params, seed=derive_seed(seed, OV))
    log.steps.append(ov_log)

    row_artifacts: dict[Antipattern, RowArtifact] = {}
    if "schema_violation" in fi_log.removed_rows:
        row_artifacts[Antipattern.SCHEMA_VIOLATION] = RowArtifact(
            fi_log.removed_rows["schema_violation"], transformed=False
        )
    if "duplicates" in fi_log.removed_rows:
        row_artifacts[Antipattern.DUPLICATES] = RowArtifact(
            fi_log.removed_rows["duplicates"], transformed=False
        )
    if "class_overlap" in ov_log.removed_rows:
        row_artifacts[Antipattern.CLASS_OVERLAP] = RowArtifact(
            ov_log.removed_rows["class_overlap"], transformed=True
        )

    column_artifacts: dict[Antipattern, ColumnArtifact] = {}
    if "constant" in fi_log.removed_columns:
        column_artifacts[Antipattern.CONSTANT] = fi_log.removed_columns["constant"]
    if "correlated_redundant" in fi_log.removed_columns:
        column_artifacts[Antipattern.CORR_REDUNDANT] = fi_log.removed_columns["correlated_redundant"]

    tp = TransformParams(
        fitted={n: t for n, t in (tr_log.transform.fitted if tr_log.transform else {}).items()
                if n in ds4.feature_names},
        final_columns=tuple(ds4.feature_names),
    )
    return CleanBaseline(
        dataset=ds4,
        transform_params=tp,
        row_artifacts=row_artifacts,
        column_artifacts=column_artifacts,
        pre_transform=tr_log.pre_transform,
        source_imbalance=source_imbalance,
        log=log,
    )


# -- injection -----------------------------------------------------------------------


def _transform_artifact_rows(rows: Dataset, params: TransformParams) -> Dataset:
    """Restrict captured raw rows to the baseline columns and apply the
    baseline transforms, so they differ from clean rows only by their
    antipattern."""
    final = list(params.final_columns or rows.feature_names)
    out = rows.take_columns(final)
    features = out.features.copy()
    for name, transform in params.fitted.items():
        j = out.col_index(name)
        ok = ~out.missing_mask[:, j]
        features[ok, j] = transform.apply(features[ok, j])
    return out.replace_features(features)


def _append_rows(clean: Dataset, extra: Dataset) -> Dataset:
    if clean.feature_names != extra.feature_names:
        raise InjectionError("artifact rows do not align with the baseline columns")
    return Dataset(
        id=clean.id,
        feature_names=clean.feature_names,
        features=np.vstack([clean.features, extra.features]),
        label_heuristic=np.concatenate([clean.label_heuristic, extra.label_heuristic]),
        label_realistic=np.concatenate([clean.label_realistic, extra.label_realistic]),
        active_label=clean.active_label,
        missing_mask=np.vstack([clean.missing_mask, extra.missing_mask]),
        row_ids=np.concatenate([clean.row_ids, extra.row_ids]),
    )


def _inject_rows(clean: Dataset, spec: InjectionSpec) -> Dataset:
    artifact = spec.rows
    if artifact is None or artifact.rows.n_rows == 0:
        return clean
    k = artifact.rows.n_rows
    if k > clean.n_rows:
        raise InjectionError(f"cannot remove {k} rows from a {clean.n_rows}-row baseline")
    if k > _DILUTION_WARN_FRACTION * clean.n_rows:
        warnings.warn(
            f"re-adding {k} rows dilutes more than {_DILUTION_WARN_FRACTION:.0%} of the clean data",
            stacklevel=2,
        )
    rows = artifact.rows
    if not artifact.transformed:
        rows = _transform_artifact_rows(rows, spec.transform_params or TransformParams())
    rng = np.random.default_rng(spec.seed)
    removed = rng.choice(clean.n_rows, size=k, replace=False)
    return _append_rows(clean.drop_rows(removed), rows)


def _inject_columns(clean: Dataset, spec: InjectionSpec) -> Dataset:
    artifact = spec.columns
    if artifact is None or not artifact.names:
        return clean
    values = artifact.values_for(clean.row_ids)
    return clean.add_columns(artifact.names, values)


def withholding_params(params: TransformParams, antipattern: Antipattern) -> TransformParams:
    """Transform parameters with the injected antipattern's component undone."""
    fitted = {}
    for name, t in params.fitted.items():
        if antipattern is Antipattern.TAILED:
            kept = t.without_log()
        elif antipattern is Antipattern.UNNORMALIZED:
            kept = t.without_zscore()
        else:
            kept = t
        if kept is not None:
            fitted[name] = kept
    return TransformParams(fitted=fitted, final_columns=params.final_columns)


def _withheld_kinds(antipattern: Antipattern) -> tuple[str, ...]:
    from dqa.cleaning import LOG, LOG_THEN_ZSCORE, ZSCORE

    if antipattern is Antipattern.TAILED:
        return (LOG, LOG_THEN_ZSCORE)
    return (ZSCORE, LOG_THEN_ZSCORE)


def _inject_withheld_transform(clean: Dataset, spec: InjectionSpec) -> Dataset:
    params = spec.transform_params or TransformParams()
    kinds = _withheld_kinds(spec.antipattern)
    affected = [n for n, t in params.fitted.items() if t.kind in kinds and n in clean.feature_names]
    if not affected or spec.pre_transform is None:
        return clean
    reduced = withholding_params(params, spec.antipattern)
    features = clean.features.copy()
    raw_all = spec.pre_transform.values_for(clean.row_ids)
    for name in affected:
        j = clean.col_index(name)
        raw = raw_all[:, spec.pre_transform.names.index(name)]
        kept = reduced.fitted.get(name)
        ok = ~clean.missing_mask[:, j]
        features[ok, j] = kept.apply(raw[ok]) if kept is not None else raw[ok]
    return clean.replace_features(features)


def _inject_imbalance(clean: Dataset, spec: InjectionSpec) -> Dataset:
    target = spec.target_imbalance
    if target is None or not 0.0 < target <= 0.5:
        raise InjectionError("class-imbalance injection needs a target ratio in (0, 0.5]")
    y = clean.labels()
    ones = int(y.sum())
    minority_class = 1 if ones * 2 <= clean.n_rows else 0
    minority = np.flatnonzero(y == minority_class)
    majority_count = clean.n_rows - minority.size
    keep_minority = int(np.floor(target * majority_count / (1.0 - target)))
    if keep_minority >= minority.size:
        warnings.warn("baseline is already at or below the target imbalance", stacklevel=2)
        return clean
    if keep_minority < 1:
        raise InjectionError("target imbalance would eliminate the minority class")
    rng = np.random.default_rng(spec.seed)
    kept = rng.choice(minority, size=keep_minority, replace=False)
    drop = np.setdiff1d(minority, kept)
    return clean.drop_rows(drop)


def inject(clean: Dataset, spec: InjectionSpec) -> Dataset:
    """Re-introduce exactly one antipattern into a clean baseline."""
    ap = spec.antipattern
    if ap in ROW_BASED:
        return _inject_rows(clean, spec)
    if ap in COLUMN_BASED:
        return _inject_columns(clean, spec)
    if ap in (Antipattern.TAILED, Antipattern.UNNORMALIZED):
        return _inject_withheld_transform(clean, spec)
    if ap is Antipattern.MISLABEL:
        return clean.with_active_label(HEURISTIC)
    if ap is Antipattern.CLASS_IMBALANCE:
        return _inject_imbalance(clean, spec)
    raise InjectionError(f"no injection defined for {ap.value}")


# -- the split x condition grid ------------------------------------------------------------


@dataclass(frozen=True)
class InjectionTask:
    dataset_id: str
    condition: str
    split_index: int
    train_view: Dataset
    test_view: Dataset
    seed: int

    @property
    def task_id(self) -> str:
        return f"{self.dataset_id}:{self.split_index}:{self.condition}"


def _test_view_for(
    task_condition: Antipattern | None,
    baseline: CleanBaseline,
    test: Dataset,
) -> Dataset:
    params = baseline.transform_params
    if task_condition in (Antipattern.TAILED, Antipattern.UNNORMALIZED):
        params = withholding_params(params, task_condition)
    view = apply_transform_to_test(test, params)
    if task_condition in COLUMN_BASED and task_condition in baseline.column_artifacts:
        names = baseline.column_artifacts[task_condition].names
        view = view.add_columns(names, test.take_columns(list(names)).features)
    return view


def injection_grid(
    ds: Dataset,
    splits: int = 10,
    master_seed: int = 0,
    params: CleaningParams = CleaningParams(),
    imbalance_ratio: float | None = None,
) -> list[InjectionTask]:
    """Build the full split x condition task grid.

    Per split: a stratified 80/20 split (realistic labels), a clean baseline
    built from the training side only (starting from heuristic labels so the
    mislabel step has something to correct), one task per injectable
    antipattern plus the clean control and the class-imbalance variant.  Test
    views carry the training-fitted transforms of their condition.  Every
    task owns a seed derived from (master seed, split, condition), so task
    outputs are independent of scheduling.
    """
    if splits < 1:
        raise InjectionError("splits must be >= 1")
    tasks: list[InjectionTask] = []
    for split_index in range(splits):
        train, test = split_stratified(ds, 0.8, seed=derive_seed(master_seed, "split", split_index))
        baseline = make_clean_baseline(
            train.with_active_label(HEURISTIC), params, seed=derive_seed(master_seed, "baseline", split_index)
        )
        tasks.append(
            InjectionTask(
                dataset_id=ds.id,
                condition=CLEAN_CONDITION,
                split_index=split_index,
                train_view=baseline.dataset,
                test_view=_test_view_for(None, baseline, test),
                seed=derive_seed(master_seed, "task", split_index, CLEAN_CONDITION),
            )
        )
        for ap in INJECTABLE:
            seed = derive_seed(master_seed, "task", split_index, ap.value)
            spec = baseline.spec_for(ap, seed)
            tasks.append(
                InjectionTask(
                    dataset_id=ds.id,
                    condition=ap.value,
                    split_index=split_index,
                    train_view=inject(baseline.dataset, spec),
                    test_view=_test_view_for(ap, baseline, test),
                    seed=seed,
                )
            )
        seed = derive_seed(master_seed, "task", split_index, Antipattern.CLASS_IMBALANCE.value)
        target = imbalance_ratio if imbalance_ratio is not None else baseline.source_imbalance
        imbalance_spec = InjectionSpec(
            antipattern=Antipattern.CLASS_IMBALANCE, seed=seed, target_imbalance=target
        )
        tasks.append(
            InjectionTask(
                dataset_id=ds.id,
                condition=Antipattern.CLASS_IMBALANCE.value,
                split_index=split_index,
                train_view=inject(baseline.dataset, imbalance_spec),
                test_view=_test_view_for(None, baseline, test),
                seed=seed,
            )
        )
    return tasks
