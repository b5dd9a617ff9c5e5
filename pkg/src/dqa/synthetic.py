"""Seeded synthetic datasets: an all-clean baseline generator and a dirty
generator with precisely known planted antipatterns.

The dirty generator reports exactly what it planted so detector tests can
assert flags row-for-row.  Class structure is two well-separated Gaussian
blobs (one per class) with a fraction of cross-class intruders inside each
blob, which is what the overlap detector is expected to recover.  Plant row
sets are kept disjoint (and duplicate copies stay within their blob) so one
plant never perturbs another's ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dqa.dataset import Dataset

SCHEMA_LINE_COL = "CountLine"
SCHEMA_COMMENT_COL = "CountLineComment"


@dataclass
class Plants:
    """Ground truth of what was planted into a dirty dataset."""

    duplicate_rows: tuple[int, ...] = ()
    constant_columns: tuple[str, ...] = ()
    correlated_pair: tuple[str, str] | None = None
    intruder_rows: tuple[int, ...] = ()
    mislabel_rows: tuple[int, ...] = ()
    schema_violation_rows: tuple[int, ...] = ()
    heavy_tail_columns: tuple[str, ...] = ()
    missing_cells: tuple[tuple[int, int], ...] = ()


def _blob_labels(rows: int) -> np.ndarray:
    labels = np.zeros(rows, dtype=np.int8)
    labels[rows // 2 :] = 1
    return labels


def make_clean_dataset(
    seed: int,
    rows: int = 200,
    features: int = 12,
    gap: float = 2.4,
    dataset_id: str | None = None,
) -> Dataset:
    """A dataset on which every detector comes back clean.

    Every column separates the two classes by the same modest per-column gap:
    blobs far apart along the diagonal keep arbitrary k-means clusters
    class-pure, while the per-column gap stays small enough that pairwise
    Spearman correlations sit below the collapse threshold.  The generator
    verifies cleanliness with the detectors and bumps an internal sub-seed
    until a flag-free draw appears, so results stay deterministic per seed.
    """
    from dqa import detectors as _det

    for attempt in range(64):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        blob = _blob_labels(rows)
        direction = np.where(blob == 1, 1.0, -1.0)
        cols = [10.0 + direction * gap / 2.0 + rng.normal(0, 1, rows) for _ in range(features)]
        names = [f"sig_{i}" for i in range(features)]
        matrix = np.column_stack(cols)
        order = rng.permutation(rows)
        ds = Dataset(
            id=dataset_id or f"clean-{seed}",
            feature_names=tuple(names),
            features=matrix[order],
            label_heuristic=blob[order],
            label_realistic=blob[order],
        )
        clean = (
            not _det.detect_tailed(ds).flagged_columns
            and not _det.detect_unnormalized(ds).flagged_columns
            and not _det.detect_correlated_redundant(ds).flagged_columns
            and all(
                not _det.detect_class_overlap_ikmcca(ds, seed=s).flagged_rows
                and not _det.detect_class_overlap_ikmcca(ds, k=2, p=0.5, seed=s).flagged_rows
                for s in range(5)
            )
        )
        if clean:
            return ds
    raise RuntimeError("could not draw a flag-free dataset; widen the gap or add rows")


def make_dirty_dataset(
    seed: int,
    rows: int = 500,
    informative: int = 8,
    noise: int = 5,
    gap: float = 2.4,
    intruder_fraction: float = 0.10,
    mislabel_fraction: float = 0.10,
    n_duplicates: int = 12,
    n_schema_violations: int = 10,
    n_missing_cells: int = 0,
    dataset_id: str | None = None,
) -> tuple[Dataset, Plants]:
    """Two-blob data with planted antipatterns and exact ground truth.

    Plants: duplicate rows (feature copies of same-blob rows; the later index
    of each pair is recorded as the duplicate), one constant column, one
    near-perfectly correlated column pair, class-overlap intruders (rows whose
    realistic label disagrees with their blob), heuristic-vs-realistic label
    conflicts, schema-violating rows (comment count exceeding line count),
    one heavy-tailed column, and optionally masked cells.
    """
    rng = np.random.default_rng(seed)
    blob = _blob_labels(rows)
    direction = np.where(blob == 1, 1.0, -1.0)

    cols, names = [], []
    for i in range(informative):
        cols.append(10.0 + direction * gap / 2.0 + rng.normal(0, 1, rows))
        names.append(f"sig_{i}")
    for i in range(noise):
        cols.append(10.0 + rng.normal(0, 1, rows))
        names.append(f"noise_{i}")

    pair_base = 10.0 + rng.normal(0, 1.0, rows)
    cols.append(pair_base)
    names.append("pair_a")
    cols.append(2.0 * pair_base + rng.normal(0, 1e-3, rows))
    names.append("pair_b")

    cols.append(np.full(rows, 3.14))
    names.append("const_col")

    cols.append(rng.lognormal(mean=0.0, sigma=1.2, size=rows))
    names.append("tail_col")

    count_line = rng.uniform(120, 500, rows)
    comment = rng.uniform(5, 100, rows)
    cols.append(count_line)
    names.append(SCHEMA_LINE_COL)
    cols.append(comment)
    names.append(SCHEMA_COMMENT_COL)

    features = np.column_stack(cols)
    label_real = blob.copy()

    # disjoint plant row pools
    pool = list(rng.permutation(rows))

    def take(count: int) -> list[int]:
        picked, rest = pool[:count], pool[count:]
        pool[:] = rest
        return [int(i) for i in picked]

    intruders: list[int] = []
    for cls in (0, 1):
        members = [i for i in pool if blob[i] == cls]
        k = int(round(intruder_fraction * int((blob == cls).sum())))
        chosen = members[:k]
        intruders.extend(int(i) for i in chosen)
        pool[:] = [i for i in pool if i not in set(chosen)]
    intruders = sorted(intruders)
    label_real[intruders] = 1 - label_real[intruders]

    label_heu = label_real.copy()
    mislabels = sorted(take(int(round(mislabel_fraction * rows))))
    label_heu[mislabels] = 1 - label_heu[mislabels]

    schema_rows = sorted(take(n_schema_violations))
    comment_idx = names.index(SCHEMA_COMMENT_COL)
    line_idx = names.index(SCHEMA_LINE_COL)
    features[schema_rows, comment_idx] = features[schema_rows, line_idx] + rng.uniform(
        10, 50, len(schema_rows)
    )

    dup_targets = take(n_duplicates)
    duplicate_rows = []
    for target in dup_targets:
        same_blob = [i for i in pool if blob[i] == blob[target]]
        source = int(same_blob[int(rng.integers(len(same_blob)))])
        pool.remove(source)
        features[target] = features[source]
        duplicate_rows.append(max(source, target))
    duplicate_rows = sorted(duplicate_rows)

    mask = np.zeros_like(features, dtype=bool)
    missing_cells = []
    for row in take(n_missing_cells):
        col = int(rng.integers(features.shape[1]))
        mask[row, col] = True
        features[row, col] = np.nan
        missing_cells.append((row, col))

    ds = Dataset(
        id=dataset_id or f"dirty-{seed}",
        feature_names=tuple(names),
        features=features,
        label_heuristic=label_heu,
        label_realistic=label_real,
        missing_mask=mask,
    )
    plants = Plants(
        duplicate_rows=tuple(duplicate_rows),
        constant_columns=("const_col",),
        correlated_pair=("pair_a", "pair_b"),
        intruder_rows=tuple(intruders),
        mislabel_rows=tuple(mislabels),
        schema_violation_rows=tuple(schema_rows),
        heavy_tail_columns=("tail_col",),
        missing_cells=tuple(missing_cells),
    )
    return ds, plants
