"""Permutation importance and interpretation-consistency analysis.

Importance of a feature is the drop in an evaluation metric caused by
shuffling that feature's column in the test set, averaged over repeats.
Feature-importance ranks come from Scott-Knott ESD over per-run importance
samples; consistency across antipattern conditions is Kendall's W, and each
condition is compared with the clean baseline via Kendall's tau-b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dqa.cleaning import derive_seed
from dqa.dataset import Dataset
from dqa.learners import (
    auroc_rank,
    average_precision,
    confusion_at,
    f1_of,
    mcc_of,
    precision_of,
    recall_of,
)
from dqa.stats import RankTable, kendalls_tau, kendalls_w, scott_knott_esd

DEFAULT_AUROC_FLOOR = 0.75
EXCLUDED_CONDITION = "correlated_redundant"  # unreliable interpretation by construction


class InterpretError(ValueError):
    pass


def _metric_fn(metric: str):
    threshold_based = {
        "precision": precision_of,
        "recall": recall_of,
        "f1": f1_of,
        "mcc": mcc_of,
    }
    if metric in threshold_based:
        fn = threshold_based[metric]
        return lambda y, s: fn(confusion_at(y, s))
    if metric == "auroc":
        return auroc_rank
    if metric == "auprc":
        return average_precision
    raise InterpretError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class ImportanceVector:
    scores: dict[str, float]
    metric: str
    repeats: int


def permutation_importance(
    model,
    test: Dataset,
    metric: str = "auroc",
    repeats: int = 10,
    seed: int = 0,
) -> ImportanceVector:
    """Per-feature metric drop when that column is shuffled in the test set.

    Columns are shuffled one at a time with per-feature derived seeds, so
    features can be permuted independently (and in parallel) with identical
    results.  Importances are raw differences: negative values are possible
    and no normalization is applied.
    """
    if repeats < 1:
        raise InterpretError("repeats must be >= 1")
    fn = _metric_fn(metric)
    y = test.labels()
    if len(np.unique(y)) < 2:
        raise InterpretError("metric undefined on a single-class test set")
    baseline = fn(y, model.score_dataset(test))
    scores: dict[str, float] = {}
    features = test.features
    for j, name in enumerate(test.feature_names):
        rng = np.random.default_rng(derive_seed(seed, "permute", name))
        drops = []
        for _ in range(repeats):
            shuffled = features.copy()
            shuffled[:, j] = rng.permutation(shuffled[:, j])
            drops.append(baseline - fn(y, model.predict_proba(shuffled)))
        scores[name] = float(np.mean(drops))
    return ImportanceVector(scores=scores, metric=metric, repeats=repeats)


def importance_ranks(vectors) -> RankTable:
    """Scott-Knott ESD feature ranks from per-run importance vectors."""
    vectors = list(vectors)
    if len(vectors) < 2:
        raise InterpretError("need importance vectors from at least 2 runs")
    names = set(vectors[0].scores)
    for v in vectors[1:]:
        if set(v.scores) != names:
            raise InterpretError("importance vectors cover different feature sets")
    groups = {name: np.array([v.scores[name] for v in vectors]) for name in names}
    return scott_knott_esd(groups)


def surviving_conditions(
    mean_auroc: dict[str, float],
    auroc_floor: float = DEFAULT_AUROC_FLOOR,
    exclude=(EXCLUDED_CONDITION,),
) -> list[str]:
    """Conditions whose models clear the AU-ROC floor, minus excluded ones."""
    return sorted(
        c for c, v in mean_auroc.items() if v >= auroc_floor and c not in exclude
    )


def concordance_across_conditions(
    rank_tables: dict[str, RankTable],
    mean_auroc: dict[str, float],
    auroc_floor: float = DEFAULT_AUROC_FLOOR,
) -> tuple[float, list[str], list[str]]:
    """Kendall's W over per-condition feature ranks, on the shared features.

    Conditions below the AU-ROC floor are dropped, as is the correlated &
    redundant condition.  Features are aligned by intersection: columns
    absent from a condition's view are excluded rather than imputed with a
    worst rank.  Returns (W, surviving conditions, shared features).
    """
    survivors = [c for c in surviving_conditions(mean_auroc, auroc_floor) if c in rank_tables]
    if len(survivors) < 2:
        raise InterpretError("insufficient conditions above the AU-ROC floor")
    shared = set(rank_tables[survivors[0]].ranks)
    for c in survivors[1:]:
        shared &= set(rank_tables[c].ranks)
    shared = sorted(shared)
    if len(shared) < 2:
        raise InterpretError("fewer than 2 features shared across surviving conditions")
    rankings = [{f: rank_tables[c].ranks[f] for f in shared} for c in survivors]
    return kendalls_w(rankings), survivors, shared


def pairwise_vs_clean(condition_table: RankTable, clean_table: RankTable) -> float:
    """Kendall's tau-b between a condition's feature ranks and the clean ranks."""
    shared = sorted(set(condition_table.ranks) & set(clean_table.ranks))
    if len(shared) < 2:
        raise InterpretError("fewer than 2 shared features")
    return kendalls_tau(
        {f: condition_table.ranks[f] for f in shared},
        {f: clean_table.ranks[f] for f in shared},
    )
