"""dqa: detect, clean, and deliberately inject data-quality antipatterns in tabular ML data.

The package is organized around a small immutable ``Dataset`` container with
dual defect-label vectors.  On top of it sit: per-antipattern detectors, a
schema-rule engine, the four cleaning steps (filtering, transformation,
mislabel correction, class-overlap removal) with their canonical orderings,
an antipattern injector that rebuilds dirty variants of a cleaned baseline,
a desk-scale model harness (logistic regression, random forest), and the
nonparametric comparison stack (Scott-Knott ESD, Cliff's delta, Kendall's
W and tau, odds ratios, Wilcoxon rank-sum).
"""

__version__ = "0.1.0"

from dqa.dataset import ColumnStats, Dataset, column_stats, load_csv, save_csv, split_stratified

__all__ = [
    "ColumnStats",
    "Dataset",
    "column_stats",
    "load_csv",
    "save_csv",
    "split_stratified",
    "__version__",
]
