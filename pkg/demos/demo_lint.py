"""
Linting a tabular dataset for data-quality antipatterns
=======================================================

This walkthrough builds a dataset with known problems (duplicates, a constant
column, a near-perfectly correlated pair, schema violations, label conflicts,
and class-overlap intruders), runs every detector, and prints what each one
found next to the planted ground truth.
"""

import numpy as np

from dqa import detectors as det
from dqa.schema import applicable_rules, builtin_sdp_rules, check_schema
from dqa.synthetic import make_dirty_dataset

ds, plants = make_dirty_dataset(seed=7, rows=400, n_missing_cells=3)
print(f"dataset: {ds.n_rows} rows x {ds.n_features} columns")
print(f"planted: {len(plants.duplicate_rows)} duplicates, "
      f"{len(plants.schema_violation_rows)} schema violations, "
      f"{len(plants.intruder_rows)} overlap intruders, "
      f"{len(plants.mislabel_rows)} mislabels\n")

# row-level findings -------------------------------------------------------

dup = det.detect_duplicates(ds)
print(f"duplicates: flagged {len(dup.flagged_rows)} rows "
      f"(exact match: {dup.flagged_rows == plants.duplicate_rows})")

missing = det.detect_missing(ds)
print(f"missing values: {int(missing.scalar)} masked cells in {len(missing.flagged_rows)} rows")

mislabels = det.detect_mislabels(ds)
print(f"mislabels: {len(mislabels.flagged_rows)} rows where the two labeling strategies disagree")

rules = applicable_rules(ds, builtin_sdp_rules())
schema = check_schema(ds, rules)
print(f"schema: {schema.total_violating_rows} violating rows across "
      f"{sum(1 for v in schema.violations.values() if v)} rules "
      f"(exact match: {schema.all_rows() == plants.schema_violation_rows})")

overlap = det.detect_class_overlap_ikmcca(ds, k=2, p=0.5, seed=3)
recovered = len(set(overlap.flagged_rows) & set(plants.intruder_rows))
print(f"class overlap: flagged {len(overlap.flagged_rows)} rows, "
      f"recovered {recovered}/{len(plants.intruder_rows)} planted intruders")

# column-level findings ----------------------------------------------------

print(f"\nconstant columns: {det.detect_constant(ds).flagged_columns}")
print(f"tailed columns: {det.detect_tailed(ds).flagged_columns}")
print(f"unnormalized columns: {det.detect_unnormalized(ds).flagged_columns}")
corr = det.detect_correlated_redundant(ds)
print(f"correlated & redundant: {corr.flagged_columns} "
      f"(one of the planted pair {plants.correlated_pair} survives)")

# dataset-level findings -----------------------------------------------------

imbalance = det.detect_class_imbalance(ds)
rfi = det.detect_row_feature_imbalance(ds)
print(f"\nminority-class share: {imbalance.scalar:.2f} "
      f"({'flagged' if imbalance.flagged_dataset else 'fine'})")
print(f"rows per column: {rfi.scalar:.1f} ({'flagged' if rfi.flagged_dataset else 'fine'})")

# how findings overlap -------------------------------------------------------

summary = det.overlap_summary([dup, missing, mislabels, overlap], ds)
print(f"\nrow-overlap histogram (findings per row): {summary.row_histogram}")
for pair, count in sorted(summary.pair_counts.items()):
    print(f"  {pair[0]} + {pair[1]}: {count} rows")
