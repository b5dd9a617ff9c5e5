"""Experiment orchestration: cleaning-order runs, antipattern-impact runs,
and interpretation-concordance runs, with resumable task execution.

A run writes a task manifest first, appends one JSON line per completed task
to ``tasks.<run>.jsonl`` (so an interrupted run resumes by skipping finished
task ids), and finally writes deterministic artifacts: a results CSV sorted
by task id plus JSON reports.  No artifact contains timestamps; reruns with
identical inputs are byte-identical.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from dqa import __version__
from dqa.cleaning import (
    CleaningParams,
    canonical_orders,
    clean,
    apply_transform_to_test,
    derive_seed,
    parse_order,
)
from dqa.dataset import HEURISTIC, Dataset, load_csv, split_stratified
from dqa.injection import CLEAN_CONDITION, injection_grid
from dqa.interpret import (
    DEFAULT_AUROC_FLOOR,
    concordance_across_conditions,
    importance_ranks,
    pairwise_vs_clean,
    permutation_importance,
)
from dqa.learners import METRIC_NAMES, evaluate, random_search, train
from dqa.schema import builtin_sdp_rules, parse_rules
from dqa.stats import cliffs_delta, odds_ratio, scott_knott_esd, top_half_membership

SUBSEQUENCE_PAIRS = (("Mi", "Ov"), ("Fi", "Tr"), ("Tr", "Ov"), ("Fi", "Ov"))
MAGNITUDE_CODES = {"Negligible": "N", "Small": "S", "Medium": "M", "Large": "L"}


class ExperimentError(RuntimeError):
    pass


@dataclass
class RunConfig:
    data: list[str] = field(default_factory=list)
    heuristic_col: str = "HeuBug"
    realistic_col: str = "RealBug"
    seed: int = 0
    splits: int = 10
    learners: list[str] = field(default_factory=lambda: ["logreg", "forest"])
    orders: list[str] = field(default_factory=list)  # empty = all 12 canonical
    out: str = "dqa-out"
    jobs: int = 1
    rules: str = "builtin"  # builtin | none | path to a .rules file
    n_iter: int = 10
    cv_k: int = 3
    eq_tolerance: float = 1e-9
    tailed_threshold: float = 0.25
    z_threshold: float = 3.0
    rho_threshold: float = 0.7
    r2_threshold: float = 0.9
    drift_threshold: float = 0.10
    drift_bins: int = 20
    imbalance_threshold: float = 0.10
    row_feature_ratio: float = 10.0
    overlap_k: int | None = None
    overlap_p: float | None = None
    imbalance_ratio: float | None = None
    auroc_floor: float = DEFAULT_AUROC_FLOOR
    importance_repeats: int = 10
    drift_against: str | None = None

    def config_hash(self) -> str:
        content = {k: v for k, v in asdict(self).items() if k not in ("out", "jobs")}
        payload = json.dumps(content, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def meta(self) -> dict:
        return {"tool_version": __version__, "master_seed": self.seed, "config_hash": self.config_hash()}

    def load_rules(self):
        if self.rules == "builtin":
            return tuple(builtin_sdp_rules())
        if self.rules == "none":
            return ()
        with open(self.rules, encoding="utf-8") as fh:
            return tuple(parse_rules(fh.read()))

    def cleaning_params(self) -> CleaningParams:
        return CleaningParams(
            rules=self.load_rules(),
            eq_tolerance=self.eq_tolerance,
            tailed_threshold=self.tailed_threshold,
            z_threshold=self.z_threshold,
            rho_threshold=self.rho_threshold,
            r2_threshold=self.r2_threshold,
            overlap_k=self.overlap_k,
            overlap_p=self.overlap_p,
        )

    def load_datasets(self) -> list[Dataset]:
        if not self.data:
            raise ExperimentError("no datasets given")
        return [load_csv(p, self.heuristic_col, self.realistic_col) for p in self.data]

    def order_list(self):
        if not self.orders:
            return canonical_orders()
        return [parse_order(o) for o in self.orders]


# -- deterministic artifact writing ----------------------------------------------------


def write_json(path: str, payload: dict, meta: dict) -> None:
    body = {"meta": meta}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_results_csv(path: str, rows: list[dict], meta: dict) -> None:
    columns = ["dataset", "split", "condition", "learner"] + list(METRIC_NAMES) + ["seed"]
    lines = [",".join(columns)]
    for row in sorted(rows, key=lambda r: (r["dataset"], r["split"], r["condition"], r["learner"])):
        cells = [str(row["dataset"]), str(row["split"]), str(row["condition"]), str(row["learner"])]
        cells += [repr(float(row[m])) for m in METRIC_NAMES]
        cells.append(str(row["seed"]))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    write_json(path + ".meta.json", {}, meta)


class TaskJournal:
    """Append-only journal of finished tasks; resumes by skipping known ids."""

    def __init__(self, path: str):
        self.path = path
        self.done: dict[str, dict] = {}
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        record = json.loads(line)
                        self.done[record["task_id"]] = record
        self._fh = open(path, "a", encoding="utf-8")

    def has(self, task_id: str) -> bool:
        return task_id in self.done

    def record(self, task_id: str, payload: dict) -> None:
        record = {"task_id": task_id}
        record.update(payload)
        self.done[task_id] = record
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _run_tasks(tasks: list[tuple[str, callable, tuple]], journal: TaskJournal, jobs: int) -> None:
    pending = [(tid, fn, args) for tid, fn, args in tasks if not journal.has(tid)]
    if jobs <= 1 or len(pending) <= 1:
        for tid, fn, args in pending:
            journal.record(tid, fn(*args))
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(fn, *args): tid for tid, fn, args in pending}
        for fut in concurrent.futures.as_completed(futures):
            journal.record(futures[fut], fut.result())


# -- shared model-evaluation step -------------------------------------------------------


def _fit_and_score(train_view: Dataset, test_view: Dataset, learner: str, seed: int, config: RunConfig) -> dict:
    hp = random_search(train_view, learner, n_iter=config.n_iter, k=config.cv_k, seed=seed)
    model = train(learner, train_view, hp, seed=derive_seed(seed, "fit"))
    result = evaluate(model, test_view)
    return result.as_dict()


# -- cleaning-order experiment ------------------------------------------------------------


@dataclass(frozen=True)
class _OrderTask:
    dataset_index: int
    split_index: int
    order_name: str

    def task_id(self, dataset_id: str) -> str:
        return f"{dataset_id}:{self.split_index}:{self.order_name}"


def _order_task_result(ds: Dataset, spec: _OrderTask, config: RunConfig, params: CleaningParams) -> dict:
    split_seed = derive_seed(config.seed, "split", ds.id, spec.split_index)
    train_side, test_side = split_stratified(ds, 0.8, seed=split_seed)
    order = parse_order(spec.order_name)
    cleaned, _, tp = clean(
        train_side.with_active_label(HEURISTIC),
        order,
        params,
        seed=derive_seed(config.seed, "clean", ds.id, spec.split_index, spec.order_name),
    )
    test_view = apply_transform_to_test(test_side, tp)
    out = {}
    for learner in config.learners:
        seed = derive_seed(config.seed, "tune", ds.id, spec.split_index, spec.order_name, learner)
        out[learner] = dict(
            _fit_and_score(cleaned, test_view, learner, seed, config), seed=seed
        )
    return out


def run_orders(config: RunConfig) -> dict:
    """Clean each split with every order, train and evaluate every learner,
    then rank orders per metric and compute sub-sequence odds ratios."""
    datasets = config.load_datasets()
    params = config.cleaning_params()
    orders = config.order_list()
    os.makedirs(config.out, exist_ok=True)
    meta = config.meta()

    manifest = {
        "run": "orders",
        "datasets": [ds.id for ds in datasets],
        "splits": config.splits,
        "orders": [o.name for o in orders],
        "learners": list(config.learners),
    }
    write_json(os.path.join(config.out, "manifest_orders.json"), manifest, meta)

    journal = TaskJournal(os.path.join(config.out, "tasks.orders.jsonl"))
    tasks = []
    for di, ds in enumerate(datasets):
        for split_index in range(config.splits):
            for order in orders:
                spec = _OrderTask(di, split_index, order.name)
                tasks.append((spec.task_id(ds.id), _order_task_result, (ds, spec, config, params)))
    _run_tasks(tasks, journal, config.jobs)
    journal.close()

    rows = []
    for di, ds in enumerate(datasets):
        for split_index in range(config.splits):
            for order in orders:
                record = journal.done[_OrderTask(di, split_index, order.name).task_id(ds.id)]
                for learner in config.learners:
                    payload = record[learner]
                    rows.append(
                        dict(
                            dataset=ds.id,
                            split=split_index,
                            condition=order.name,
                            learner=learner,
                            seed=payload["seed"],
                            **{m: payload[m] for m in METRIC_NAMES},
                        )
                    )
    write_results_csv(os.path.join(config.out, "results_orders.csv"), rows, meta)

    rank_report = _order_rank_tables(rows, datasets, config)
    odds_report = _odds_analysis(rows, datasets, config)
    write_json(os.path.join(config.out, "order_ranks.json"), rank_report, meta)
    write_json(os.path.join(config.out, "odds_report.json"), odds_report, meta)
    return {"rows": rows, "ranks": rank_report, "odds": odds_report}


def _order_rank_tables(rows, datasets, config) -> dict:
    report = {}
    for ds in datasets:
        for learner in config.learners:
            for metric in METRIC_NAMES:
                groups = {}
                for row in rows:
                    if row["dataset"] == ds.id and row["learner"] == learner:
                        groups.setdefault(row["condition"], []).append(row[metric])
                if all(len(v) >= 2 for v in groups.values()) and groups:
                    table = scott_knott_esd(groups)
                    report[f"{ds.id}/{learner}/{metric}"] = dict(sorted(table.ranks.items()))
    return {"rank_tables": report}


def _odds_analysis(rows, datasets, config) -> dict:
    """Sub-sequence odds ratios: for each (dataset, split, metric), orders in
    the top half (>= median) feed the 2x2 counts of A-before-B vs B-before-A."""
    order_names = [o.name for o in config.order_list()]
    positions = {name: {name[i : i + 2]: i for i in range(0, 8, 2)} for name in order_names}
    per_learner: dict[str, dict] = {}
    for learner in config.learners:
        pair_counts = {pair: [0, 0, 0, 0] for pair in SUBSEQUENCE_PAIRS}
        per_metric = {
            metric: {pair: [0, 0, 0, 0] for pair in SUBSEQUENCE_PAIRS} for metric in METRIC_NAMES
        }
        for ds in datasets:
            for split in range(config.splits):
                base = [
                    r
                    for r in rows
                    if r["dataset"] == ds.id and r["split"] == split and r["learner"] == learner
                ]
                for metric in METRIC_NAMES:
                    values = {r["condition"]: r[metric] for r in base}
                    if len(values) < 2:
                        continue
                    top = top_half_membership(values)
                    for pair in SUBSEQUENCE_PAIRS:
                        a, b = pair
                        for name in values:
                            ab = positions[name][a] < positions[name][b]
                            in_top = name in top
                            idx = (0 if in_top else 1) if ab else (2 if in_top else 3)
                            pair_counts[pair][idx] += 1
                            per_metric[metric][pair][idx] += 1
        learner_report = {}
        for pair in SUBSEQUENCE_PAIRS:
            cells = pair_counts[pair]
            if cells[0] + cells[1] == 0 or cells[2] + cells[3] == 0:
                continue  # a restricted order list can leave a side unobserved
            result = odds_ratio(*cells)
            learner_report["".join(pair)] = {
                "odds_ratio": result.or_value,
                "important": result.important,
                "cells": cells,
                "per_metric": {
                    m: odds_ratio(*per_metric[m][pair]).or_value
                    for m in METRIC_NAMES
                    if sum(per_metric[m][pair]) > 0
                },
            }
        per_learner[learner] = learner_report
    return {"odds": per_learner, "pairs": ["".join(p) for p in SUBSEQUENCE_PAIRS]}


# -- antipattern-impact experiment ------------------------------------------------------------


def _grid_for(ds: Dataset, config: RunConfig, params: CleaningParams):
    return injection_grid(
        ds,
        splits=config.splits,
        master_seed=derive_seed(config.seed, "grid", ds.id),
        params=params,
        imbalance_ratio=config.imbalance_ratio,
    )


def _injection_task_result(task, config: RunConfig) -> dict:
    out = {}
    for learner in config.learners:
        seed = derive_seed(task.seed, learner)
        out[learner] = dict(
            _fit_and_score(task.train_view, task.test_view, learner, seed, config), seed=seed
        )
    return out


def run_antipatterns(config: RunConfig) -> dict:
    """Train and evaluate every injection-grid task, rank conditions per
    metric, and report effect sizes against the clean control."""
    datasets = config.load_datasets()
    params = config.cleaning_params()
    os.makedirs(config.out, exist_ok=True)
    meta = config.meta()

    grids = {ds.id: _grid_for(ds, config, params) for ds in datasets}
    manifest = {
        "run": "antipatterns",
        "datasets": [ds.id for ds in datasets],
        "splits": config.splits,
        "conditions": sorted({t.condition for grid in grids.values() for t in grid}),
        "learners": list(config.learners),
        "tasks": [
            {
                "task_id": t.task_id,
                "condition": t.condition,
                "split": t.split_index,
                "train_rows": t.train_view.n_rows,
                "train_cols": t.train_view.n_features,
                "test_rows": t.test_view.n_rows,
                "seed": t.seed,
            }
            for grid in grids.values()
            for t in grid
        ],
    }
    write_json(os.path.join(config.out, "manifest_antipatterns.json"), manifest, meta)

    journal = TaskJournal(os.path.join(config.out, "tasks.antipatterns.jsonl"))
    tasks = [
        (t.task_id, _injection_task_result, (t, config)) for grid in grids.values() for t in grid
    ]
    _run_tasks(tasks, journal, config.jobs)
    journal.close()

    rows = []
    for ds in datasets:
        for task in grids[ds.id]:
            record = journal.done[task.task_id]
            for learner in config.learners:
                payload = record[learner]
                rows.append(
                    dict(
                        dataset=ds.id,
                        split=task.split_index,
                        condition=task.condition,
                        learner=learner,
                        seed=payload["seed"],
                        **{m: payload[m] for m in METRIC_NAMES},
                    )
                )
    write_results_csv(os.path.join(config.out, "results_antipatterns.csv"), rows, meta)

    report = _antipattern_effects(rows, datasets, config)
    write_json(os.path.join(config.out, "antipattern_report.json"), report, meta)
    return {"rows": rows, "report": report}


def _antipattern_effects(rows, datasets, config) -> dict:
    """Rank conditions per metric; for conditions whose rank differs from the
    clean control, attach the rank difference (clean minus condition; positive
    means the condition improved) and Cliff's delta of clean vs condition
    (negative delta = improvement over clean)."""
    report = {}
    for ds in datasets:
        for learner in config.learners:
            for metric in METRIC_NAMES:
                groups: dict[str, list[float]] = {}
                for row in rows:
                    if row["dataset"] == ds.id and row["learner"] == learner:
                        groups.setdefault(row["condition"], []).append(row[metric])
                if CLEAN_CONDITION not in groups or any(len(v) < 2 for v in groups.values()):
                    continue
                table = scott_knott_esd(groups)
                clean_rank = table.ranks[CLEAN_CONDITION]
                entries = {}
                for condition, rank in sorted(table.ranks.items()):
                    entry = {"rank": rank}
                    if condition != CLEAN_CONDITION and rank != clean_rank:
                        effect = cliffs_delta(groups[CLEAN_CONDITION], groups[condition])
                        entry["rank_difference"] = clean_rank - rank
                        entry["cliffs_delta"] = effect.delta
                        entry["magnitude"] = MAGNITUDE_CODES[effect.magnitude]
                    entries[condition] = entry
                report[f"{ds.id}/{learner}/{metric}"] = entries
    return {"effects": report}


# -- interpretation-concordance experiment --------------------------------------------------------


def run_interpret(config: RunConfig) -> dict:
    """Permutation-importance ranks per condition, Kendall's W across the
    conditions above the AU-ROC floor, and tau against the clean control."""
    datasets = config.load_datasets()
    params = config.cleaning_params()
    os.makedirs(config.out, exist_ok=True)
    meta = config.meta()
    report: dict[str, dict] = {}

    for ds in datasets:
        grid = _grid_for(ds, config, params)
        conditions = sorted({t.condition for t in grid})
        for learner in config.learners:
            auroc_samples: dict[str, list[float]] = {c: [] for c in conditions}
            vectors: dict[str, list] = {c: [] for c in conditions}
            for task in grid:
                seed = derive_seed(task.seed, learner)
                hp = random_search(task.train_view, learner, config.n_iter, config.cv_k, seed=seed)
                model = train(learner, task.train_view, hp, seed=derive_seed(seed, "fit"))
                result = evaluate(model, task.test_view)
                auroc_samples[task.condition].append(result.auroc)
                vectors[task.condition].append(
                    permutation_importance(
                        model,
                        task.test_view,
                        metric="auroc",
                        repeats=config.importance_repeats,
                        seed=derive_seed(seed, "importance"),
                    )
                )
            mean_auroc = {c: float(np.mean(v)) for c, v in auroc_samples.items() if v}
            tables = {}
            for condition, vecs in vectors.items():
                if len(vecs) < 2:
                    continue
                shared = set(vecs[0].scores)
                for v in vecs[1:]:
                    shared &= set(v.scores)
                shared = sorted(shared)
                if len(shared) < 2:
                    continue
                aligned = [
                    type(v)(scores={f: v.scores[f] for f in shared}, metric=v.metric, repeats=v.repeats)
                    for v in vecs
                ]
                tables[condition] = importance_ranks(aligned)
            entry: dict = {"mean_auroc": dict(sorted(mean_auroc.items()))}
            try:
                w, survivors, shared = concordance_across_conditions(
                    tables, mean_auroc, config.auroc_floor
                )
                entry["kendalls_w"] = w
                entry["surviving_conditions"] = survivors
                entry["shared_features"] = shared
            except Exception as exc:  # insufficient conditions is a reportable outcome
                entry["kendalls_w"] = None
                entry["skip_reason"] = str(exc)
            if CLEAN_CONDITION in tables:
                taus = {}
                for condition, table in tables.items():
                    if condition == CLEAN_CONDITION:
                        continue
                    if entry.get("surviving_conditions") and condition not in entry["surviving_conditions"]:
                        continue
                    try:
                        taus[condition] = pairwise_vs_clean(table, tables[CLEAN_CONDITION])
                    except Exception as exc:
                        taus[condition] = None
                entry["tau_vs_clean"] = dict(sorted(taus.items()))
            report[f"{ds.id}/{learner}"] = entry

    write_json(os.path.join(config.out, "interpret_report.json"), {"concordance": report}, meta)
    return {"report": report}
