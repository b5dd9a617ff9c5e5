"""
Building a clean baseline and re-introducing one antipattern at a time
======================================================================

The baseline pipeline is Fi -> Tr -> Mi -> Ov.  Everything it removes gets
captured, so each antipattern can be added back in isolation: row-based ones
with exact size control (equal number of random clean rows leaves), column
ones by appending the removed columns, transform ones by undoing the fitted
log/z-score on the affected columns, mislabel by flipping the active label
vector, and class imbalance by undersampling the minority class.
"""

from dqa.cleaning import CleaningParams
from dqa.detectors import Antipattern
from dqa.injection import INJECTABLE, inject, injection_grid, make_clean_baseline
from dqa.synthetic import make_dirty_dataset

ds, plants = make_dirty_dataset(seed=9, rows=400)
print(f"dirty dataset: {ds.n_rows} rows x {ds.n_features} columns")

baseline = make_clean_baseline(ds.with_active_label("heuristic"), CleaningParams(), seed=3)
clean = baseline.dataset
print(f"clean baseline: {clean.n_rows} rows x {clean.n_features} columns")
print("captured artifacts:")
for ap, artifact in baseline.row_artifacts.items():
    print(f"  {ap.value}: {artifact.rows.n_rows} rows")
for ap, artifact in baseline.column_artifacts.items():
    print(f"  {ap.value}: columns {artifact.names}")
print(f"  fitted transforms: { {c: t.kind for c, t in baseline.transform_params.fitted.items()} }")

print("\ninjections (one antipattern at a time):")
for ap in INJECTABLE:
    injected = inject(clean, baseline.spec_for(ap, seed=17))
    rows = f"{injected.n_rows} rows"
    if ap in (Antipattern.SCHEMA_VIOLATION, Antipattern.DUPLICATES, Antipattern.CLASS_OVERLAP):
        rows += " (size-controlled)"
    print(f"  {ap.value:<22} -> {rows}, {injected.n_features} columns, "
          f"active label: {injected.active_label}")

tasks = injection_grid(ds, splits=3, master_seed=1)
print(f"\ninjection grid for 3 splits: {len(tasks)} tasks "
      f"({len({t.condition for t in tasks})} conditions per split)")
for task in tasks[:5]:
    print(f"  {task.task_id}: train {task.train_view.n_rows}x{task.train_view.n_features}, "
          f"test {task.test_view.n_rows}x{task.test_view.n_features}")
print("  ...")
