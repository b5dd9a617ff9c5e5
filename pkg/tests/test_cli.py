import json
import os

import numpy as np
import pytest

from dqa.cli import main
from dqa.dataset import save_csv
from dqa.synthetic import make_clean_dataset, make_dirty_dataset


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    clean = make_clean_dataset(1, dataset_id="cleanset")
    save_csv(clean, root / "clean.csv")
    dirty, _ = make_dirty_dataset(
        2, rows=140, informative=5, noise=2, n_duplicates=5, n_schema_violations=4,
        dataset_id="dirtyset",
    )
    save_csv(dirty, root / "dirty.csv")
    return root


def run(*argv):
    return main([str(a) for a in argv])


class TestLint:
    def test_clean_dataset_exits_zero(self, data_dir, tmp_path):
        code = run("lint", "--data", data_dir / "clean.csv", "--out", tmp_path)
        assert code == 0
        report = json.loads((tmp_path / "lint_clean.json").read_text())
        statuses = {k: v["status"] for k, v in report["antipatterns"].items()}
        assert all(s in ("clean", "not_applicable") for s in statuses.values())
        assert report["meta"]["tool_version"]

    def test_dirty_dataset_exits_one(self, data_dir, tmp_path):
        code = run("lint", "--data", data_dir / "dirty.csv", "--out", tmp_path)
        assert code == 1
        report = json.loads((tmp_path / "lint_dirty.json").read_text())
        assert report["antipatterns"]["duplicates"]["status"] == "flagged"
        assert report["antipatterns"]["constant_features"]["status"] == "flagged"
        assert report["antipatterns"]["data_drift"]["status"] == "not_applicable"
        assert report["schema"]["per_rule"]["R2"]

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code = run("lint", "--data", tmp_path / "absent.csv", "--out", tmp_path)
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_drift_against(self, data_dir, tmp_path):
        code = run(
            "lint", "--data", data_dir / "clean.csv",
            "--drift-against", data_dir / "clean.csv", "--out", tmp_path,
        )
        assert code == 0
        report = json.loads((tmp_path / "lint_clean.json").read_text())
        assert report["antipatterns"]["data_drift"]["status"] == "clean"


class TestClean:
    def test_order_pipeline_runs(self, data_dir, tmp_path):
        code = run(
            "clean", "--data", data_dir / "dirty.csv", "--order", "FiTrMiOv",
            "--seed", 5, "--out", tmp_path,
        )
        assert code == 0
        cleaned = tmp_path / "cleaned_dirty_FiTrMiOv.csv"
        log = json.loads((tmp_path / "cleaning_log_dirty_FiTrMiOv.json").read_text())
        assert cleaned.exists()
        assert [s["step"] for s in log["log"]["steps"]] == ["Fi", "Tr", "Mi", "Ov"]

    def test_invalid_order_exits_two(self, data_dir, tmp_path):
        assert run("clean", "--data", data_dir / "dirty.csv", "--order", "FiFi", "--out", tmp_path) == 2

    def test_rerun_identical_bytes(self, data_dir, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert run(
                "clean", "--data", data_dir / "dirty.csv", "--order", "MiOvTrFi",
                "--rules", "none", "--seed", 11, "--out", out,
            ) == 0
        name = "cleaned_dirty_MiOvTrFi.csv"
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestInject:
    def test_inject_duplicates(self, data_dir, tmp_path):
        code = run(
            "inject", "--data", data_dir / "dirty.csv", "--antipattern", "duplicates",
            "--seed", 3, "--out", tmp_path,
        )
        assert code == 0
        manifest = json.loads((tmp_path / "injection_dirty_duplicates.json").read_text())
        assert manifest["injected_rows"] == manifest["clean_rows"]

    def test_unknown_antipattern(self, data_dir, tmp_path):
        assert run(
            "inject", "--data", data_dir / "dirty.csv", "--antipattern", "nonsense",
            "--out", tmp_path,
        ) == 2


class TestRunOrders:
    def test_small_run_row_count_and_resume(self, data_dir, tmp_path):
        out = tmp_path / "orders"
        args = (
            "run-orders", "--data", data_dir / "dirty.csv", "--splits", 2,
            "--learners", "logreg", "--orders", "FiTrMiOv,TrOvMiFi",
            "--rules", "none", "--seed", 3, "--n-iter", 2, "--out", out,
        )
        assert run(*args) == 0
        lines = (out / "results_orders.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 2 * 1  # header + splits x orders x learners
        manifest = json.loads((out / "manifest_orders.json").read_text())
        assert manifest["orders"] == ["FiTrMiOv", "TrOvMiFi"]
        before = (out / "results_orders.csv").read_bytes()
        journal_size = (out / "tasks.orders.jsonl").stat().st_size
        assert run(*args) == 0  # resume: no new journal entries, same bytes
        assert (out / "tasks.orders.jsonl").stat().st_size == journal_size
        assert (out / "results_orders.csv").read_bytes() == before


class TestRunAntipatterns:
    def test_small_run(self, data_dir, tmp_path):
        out = tmp_path / "ap"
        code = run(
            "run-antipatterns", "--data", data_dir / "dirty.csv", "--splits", 2,
            "--learners", "logreg", "--seed", 3, "--n-iter", 2, "--out", out,
        )
        assert code == 0
        lines = (out / "results_antipatterns.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 10  # header + splits x conditions
        report = json.loads((out / "antipattern_report.json").read_text())
        for entries in report["effects"].values():
            assert "clean" in entries
            for condition, entry in entries.items():
                if "cliffs_delta" in entry:
                    assert entry["rank"] != entries["clean"]["rank"]
        assert run("report", "--out", out) == 0


class TestRunInterpret:
    def test_small_run(self, data_dir, tmp_path):
        out = tmp_path / "interp"
        code = run(
            "run-interpret", "--data", data_dir / "dirty.csv", "--splits", 2,
            "--learners", "logreg", "--seed", 3, "--n-iter", 2,
            "--importance-repeats", 2, "--auroc-floor", 0.6, "--out", out,
        )
        assert code == 0
        report = json.loads((out / "interpret_report.json").read_text())
        entry = report["concordance"]["dirty/logreg"]
        assert "mean_auroc" in entry
        assert entry["kendalls_w"] is None or -1.0 <= entry["kendalls_w"] <= 1.0


class TestConfigFile:
    def test_flags_override_config(self, data_dir, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text(
            f"data = {data_dir / 'dirty.csv'}\nseed = 1\nout = {tmp_path / 'from-config'}\n"
            "rules = none\n"
        )
        code = run("lint", "--config", config, "--out", tmp_path / "flag-wins")
        assert code in (0, 1)
        assert (tmp_path / "flag-wins" / "lint_dirty.json").exists()
        assert not (tmp_path / "from-config").exists()

    def test_bad_config_line(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("not a key value line\n")
        assert run("lint", "--config", config, "--out", tmp_path) == 2


class TestReport:
    def test_empty_out_dir(self, tmp_path):
        assert run("report", "--out", tmp_path) == 1
