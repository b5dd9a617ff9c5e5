"""Command-line entry point.

Commands: lint, clean, inject, run-orders, run-antipatterns, run-interpret,
report.  A flat ``key = value`` config file can seed any flag; explicit flags
win.  Exit codes: 0 success/clean, 1 findings, 2 error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from dqa import __version__, detectors
from dqa.cleaning import clean, derive_seed, parse_order
from dqa.dataset import load_csv, save_csv
from dqa.detectors import Antipattern
from dqa.experiments import (
    RunConfig,
    run_antipatterns,
    run_interpret,
    run_orders,
    write_json,
)
from dqa.injection import make_clean_baseline, inject
from dqa.schema import applicable_rules, check_schema

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


def load_config_file(path: str) -> dict:
    """Flat ``key = value`` file; '#' comments; commas make lists."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = _parse_config_value(value)
    return out


def _parse_config_value(value: str):
    if "," in value:
        return [_parse_config_value(v.strip()) for v in value.split(",") if v.strip()]
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    parser.add_argument("--data", action="append", help="dataset CSV path (repeatable)")
    parser.add_argument("--heuristic-col", dest="heuristic_col")
    parser.add_argument("--realistic-col", dest="realistic_col")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--splits", type=int)
    parser.add_argument("--learners", help="comma-separated: logreg,forest")
    parser.add_argument("--out")
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--rules", help="builtin | none | path to .rules file")
    parser.add_argument("--n-iter", dest="n_iter", type=int)
    parser.add_argument("--cv-k", dest="cv_k", type=int)
    parser.add_argument("--tailed-threshold", dest="tailed_threshold", type=float)
    parser.add_argument("--z-threshold", dest="z_threshold", type=float)
    parser.add_argument("--rho-threshold", dest="rho_threshold", type=float)
    parser.add_argument("--r2-threshold", dest="r2_threshold", type=float)
    parser.add_argument("--drift-threshold", dest="drift_threshold", type=float)
    parser.add_argument("--drift-bins", dest="drift_bins", type=int)
    parser.add_argument("--imbalance-threshold", dest="imbalance_threshold", type=float)
    parser.add_argument("--row-feature-ratio", dest="row_feature_ratio", type=float)
    parser.add_argument("--overlap-k", dest="overlap_k", type=int)
    parser.add_argument("--overlap-p", dest="overlap_p", type=float)
    parser.add_argument("--imbalance-ratio", dest="imbalance_ratio", type=float)
    parser.add_argument("--auroc-floor", dest="auroc_floor", type=float)
    parser.add_argument("--importance-repeats", dest="importance_repeats", type=int)
    parser.add_argument("--drift-against", dest="drift_against")


def build_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    valid = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in valid and value is not None:
            merged[key] = value
    if isinstance(merged.get("data"), str):
        merged["data"] = [merged["data"]]
    if isinstance(merged.get("learners"), str):
        merged["learners"] = [x for x in merged["learners"].split(",") if x]
    if isinstance(merged.get("orders"), str):
        merged["orders"] = [x for x in merged["orders"].split(",") if x]
    merged = {k: v for k, v in merged.items() if k in valid}
    return RunConfig(**merged)


# -- lint -------------------------------------------------------------------------------


def cmd_lint(args) -> int:
    config = build_config(args)
    datasets = config.load_datasets()
    os.makedirs(config.out, exist_ok=True)
    worst = EXIT_CLEAN
    for ds in datasets:
        reports = []
        all_rules = config.load_rules()
        usable = applicable_rules(ds, all_rules)
        skipped = [r.id for r in all_rules if r not in usable]
        reports.append(detectors.detect_schema_violations(ds, usable, config.eq_tolerance))
        reports.append(detectors.detect_duplicates(ds))
        reports.append(detectors.detect_missing(ds))
        reports.append(detectors.detect_tailed(ds, config.tailed_threshold))
        if ds.n_features >= 2:
            reports.append(detectors.detect_unnormalized(ds, config.z_threshold))
        reports.append(detectors.detect_constant(ds))
        if config.drift_against:
            other = load_csv(config.drift_against, config.heuristic_col, config.realistic_col)
            reports.append(
                detectors.detect_drift(ds, other, config.drift_threshold, config.drift_bins)
            )
        else:
            reports.append(
                detectors.AntipatternReport(
                    antipattern=Antipattern.DRIFT,
                    dataset_id=ds.id,
                    not_applicable_reason="no second dataset given (--drift-against)",
                )
            )
        reports.append(detectors.detect_class_imbalance(ds, config.imbalance_threshold))
        reports.append(detectors.detect_mislabels(ds))
        try:
            reports.append(
                detectors.detect_class_overlap_ikmcca(
                    ds, config.overlap_k, config.overlap_p, seed=derive_seed(config.seed, "lint-overlap")
                )
            )
        except detectors.DetectorError as exc:
            reports.append(
                detectors.AntipatternReport(
                    antipattern=Antipattern.CLASS_OVERLAP,
                    dataset_id=ds.id,
                    not_applicable_reason=str(exc),
                )
            )
        if ds.n_features >= 2 and ds.n_rows >= 3:
            reports.append(
                detectors.detect_correlated_redundant(ds, config.rho_threshold, config.r2_threshold)
            )
        reports.append(detectors.detect_row_feature_imbalance(ds, config.row_feature_ratio))
        reports.append(detectors.detect_uncommon_sign(ds))
        for stub in sorted(detectors.STUBS, key=lambda a: a.value):
            reports.append(detectors.not_applicable_report(stub, ds))

        summary = detectors.overlap_summary(reports, ds)
        schema_rule_report = check_schema(ds, usable, config.eq_tolerance)
        payload = {
            "dataset": ds.id,
            "rows": ds.n_rows,
            "columns": ds.n_features,
            "antipatterns": {r.antipattern.value: r.to_json_dict() for r in reports},
            "schema": {
                "per_rule": schema_rule_report.to_json_dict(),
                "distinct_violating_rows": schema_rule_report.total_violating_rows,
                "skipped_rules": skipped,
            },
            "overlap_summary": summary.to_json_dict(),
        }
        path = os.path.join(config.out, f"lint_{ds.id}.json")
        write_json(path, payload, config.meta())
        flagged = [r.antipattern.value for r in reports if r.status == "flagged"]
        print(f"{ds.id}: {'flagged: ' + ', '.join(flagged) if flagged else 'clean'} -> {path}")
        if flagged:
            worst = max(worst, EXIT_FINDINGS)
    return worst


# -- clean / inject ------------------------------------------------------------------------


def cmd_clean(args) -> int:
    config = build_config(args)
    order = parse_order(args.order)
    datasets = config.load_datasets()
    os.makedirs(config.out, exist_ok=True)
    params = config.cleaning_params()
    for ds in datasets:
        cleaned, log, tp = clean(
            ds.with_active_label("heuristic"), order, params, seed=derive_seed(config.seed, "clean", ds.id)
        )
        out_csv = os.path.join(config.out, f"cleaned_{ds.id}_{order.name}.csv")
        save_csv(cleaned, out_csv, config.heuristic_col, config.realistic_col)
        write_json(
            os.path.join(config.out, f"cleaning_log_{ds.id}_{order.name}.json"),
            {"log": log.to_json_dict(), "transform_params": tp.to_json_dict(),
             "rows": cleaned.n_rows, "columns": cleaned.n_features},
            config.meta(),
        )
        print(f"{ds.id}: {ds.n_rows}x{ds.n_features} -> {cleaned.n_rows}x{cleaned.n_features} ({out_csv})")
    return EXIT_CLEAN


def cmd_inject(args) -> int:
    config = build_config(args)
    try:
        antipattern = Antipattern(args.antipattern)
    except ValueError:
        raise ValueError(f"unknown antipattern {args.antipattern!r}") from None
    datasets = config.load_datasets()
    os.makedirs(config.out, exist_ok=True)
    params = config.cleaning_params()
    for ds in datasets:
        baseline = make_clean_baseline(
            ds.with_active_label("heuristic"), params, seed=derive_seed(config.seed, "baseline", ds.id)
        )
        if antipattern is Antipattern.CLASS_IMBALANCE:
            from dqa.injection import InjectionSpec

            spec = InjectionSpec(
                antipattern=antipattern,
                seed=derive_seed(config.seed, "inject", ds.id),
                target_imbalance=config.imbalance_ratio or baseline.source_imbalance,
            )
        else:
            spec = baseline.spec_for(antipattern, derive_seed(config.seed, "inject", ds.id))
        injected = inject(baseline.dataset, spec)
        out_csv = os.path.join(config.out, f"injected_{ds.id}_{antipattern.value}.csv")
        save_csv(injected, out_csv, config.heuristic_col, config.realistic_col)
        write_json(
            os.path.join(config.out, f"injection_{ds.id}_{antipattern.value}.json"),
            {
                "antipattern": antipattern.value,
                "clean_rows": baseline.dataset.n_rows,
                "clean_columns": baseline.dataset.n_features,
                "injected_rows": injected.n_rows,
                "injected_columns": injected.n_features,
                "active_label": injected.active_label,
            },
            config.meta(),
        )
        print(f"{ds.id}: clean {baseline.dataset.n_rows}x{baseline.dataset.n_features} -> "
              f"injected {injected.n_rows}x{injected.n_features} ({out_csv})")
    return EXIT_CLEAN


# -- experiment commands -----------------------------------------------------------------------


def cmd_run_orders(args) -> int:
    config = build_config(args)
    result = run_orders(config)
    print(f"evaluated {len(result['rows'])} models -> {config.out}")
    return EXIT_CLEAN


def cmd_run_antipatterns(args) -> int:
    config = build_config(args)
    result = run_antipatterns(config)
    print(f"evaluated {len(result['rows'])} models -> {config.out}")
    return EXIT_CLEAN


def cmd_run_interpret(args) -> int:
    config = build_config(args)
    result = run_interpret(config)
    print(f"concordance for {len(result['report'])} dataset/learner pairs -> {config.out}")
    return EXIT_CLEAN


# -- report ------------------------------------------------------------------------------------


def _load_json(path: str) -> dict | None:
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def render_rank_table(title: str, ranks: dict) -> str:
    lines = [title]
    for name, rank in sorted(ranks.items(), key=lambda kv: (kv[1], kv[0])):
        lines.append(f"  {rank:>4}  {name}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    config = build_config(args)
    out = config.out
    any_report = False
    orders = _load_json(os.path.join(out, "order_ranks.json"))
    if orders:
        any_report = True
        print("== cleaning-order ranks ==")
        for key, ranks in sorted(orders["rank_tables"].items()):
            print(render_rank_table(key, ranks))
    odds = _load_json(os.path.join(out, "odds_report.json"))
    if odds:
        any_report = True
        print("== sub-sequence odds ratios ==")
        for learner, pairs in sorted(odds["odds"].items()):
            for pair, entry in sorted(pairs.items()):
                marker = "important" if entry["important"] else "unimportant"
                print(f"  {learner:<8} {pair}: OR={entry['odds_ratio']:.3f} ({marker})")
    effects = _load_json(os.path.join(out, "antipattern_report.json"))
    if effects:
        any_report = True
        print("== antipattern effects vs clean ==")
        for key, entries in sorted(effects["effects"].items()):
            print(f"  {key}")
            for condition, entry in sorted(entries.items()):
                line = f"    rank {entry['rank']}  {condition}"
                if "cliffs_delta" in entry:
                    line += (
                        f"  Rdelta={entry['rank_difference']:+d}"
                        f"  {entry['magnitude']}({entry['cliffs_delta']:+.2f})"
                    )
                print(line)
    interp = _load_json(os.path.join(out, "interpret_report.json"))
    if interp:
        any_report = True
        print("== interpretation concordance ==")
        per_learner: dict[str, list[float]] = {}
        for key, entry in sorted(interp["concordance"].items()):
            w = entry.get("kendalls_w")
            w_text = f"W={w:.3f}" if w is not None else f"W skipped ({entry.get('skip_reason')})"
            print(f"  {key}: {w_text}")
            if w is not None:
                per_learner.setdefault(key.rsplit("/", 1)[-1], []).append(w)
            for condition, tau in (entry.get("tau_vs_clean") or {}).items():
                tau_text = "n/a" if tau is None else f"{tau:+.3f}"
                print(f"      tau vs clean [{condition}]: {tau_text}")
        for learner, values in sorted(per_learner.items()):
            if len(values) > 1:
                q = np.percentile(values, [0, 25, 50, 75, 100])
                print(
                    f"  {learner} W distribution: min={q[0]:.3f} q1={q[1]:.3f} "
                    f"median={q[2]:.3f} q3={q[3]:.3f} max={q[4]:.3f}"
                )
    if not any_report:
        print(f"no reports found under {out}")
        return EXIT_FINDINGS
    return EXIT_CLEAN


# -- entry point ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dqa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "lint": (cmd_lint, "detect every antipattern and write a lint report"),
        "clean": (cmd_clean, "apply a cleaning order and write the cleaned CSV + log"),
        "inject": (cmd_inject, "build the clean baseline and re-introduce one antipattern"),
        "run-orders": (cmd_run_orders, "cleaning-order experiment (ranks + odds ratios)"),
        "run-antipatterns": (cmd_run_antipatterns, "antipattern-impact experiment (ranks + effect sizes)"),
        "run-interpret": (cmd_run_interpret, "interpretation-concordance experiment"),
        "report": (cmd_report, "render saved reports as text tables"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
        if name == "clean":
            p.add_argument("--order", required=True, help="step string like FiTrMiOv")
        if name == "run-orders":
            p.add_argument("--orders", help="comma-separated order names (default: all 12)")
        if name == "inject":
            p.add_argument("--antipattern", required=True, help="antipattern value, e.g. tailed")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # CLI boundary: fold everything into exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
