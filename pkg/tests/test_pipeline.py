"""Command-level workflows and the CLI surface (exit codes, artifacts)."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import FIXTURES, fixture_batch_files
from pgo import cli, pipeline
from pgo.config import Config
from pgo.profile_model import EmptyInput
from pgo.rewriter import StaleSource
from pgo.simulate import SimulationSpec, write_trace_csv

CFG = Config(app_root="app")


def run_cli(*argv) -> tuple[int, str, str]:
    import contextlib
    import io

    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = cli.main(list(argv))
        except SystemExit as exc:  # argparse usage failures
            code = exc.code
    return code, out.getvalue(), err.getvalue()


def write_app_config(tmp_path) -> Path:
    path = tmp_path / "pgo.json"
    path.write_text(json.dumps({"app_root": "app"}), encoding="utf-8")
    return path


class TestIngest:
    def test_directory_of_batches_merges(self, tmp_path):
        result = pipeline.ingest([FIXTURES / "batches" / "sentiment"], CFG, tmp_path)
        assert result.store_path.exists()
        assert result.store.app_id == "sentiment-demo"
        assert len(result.store.samples) == 1230

    def test_dedup_matches_line_level_oracle(self, tmp_path):
        src_files = fixture_batch_files("depgraph")
        batch_dir = tmp_path / "batches"
        batch_dir.mkdir()
        original = src_files[0].read_text(encoding="utf-8").splitlines()
        (batch_dir / "one.pgoprof.jsonl").write_text(
            "\n".join(original) + "\n", encoding="utf-8")
        (batch_dir / "two.pgoprof.jsonl").write_text(  # overlapping copy
            "\n".join(original[: len(original) // 2]) + "\n", encoding="utf-8")
        result = pipeline.ingest([batch_dir], CFG, tmp_path / "out")
        unique = {line for line in original if line.strip()}
        non_meta = {line for line in unique if '"k":"meta"' not in line}
        total = (len(result.store.samples) + len(result.store.imports)
                 + len(result.store.invocations))
        assert total == len(non_meta)

    def test_empty_dir_is_empty_input(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(EmptyInput):
            pipeline.ingest([empty], CFG, tmp_path / "out")

    def test_rerun_reproduces_artifact_digests(self, tmp_path):
        r1 = pipeline.ingest([FIXTURES / "batches" / "depgraph"], CFG, tmp_path / "a")
        r2 = pipeline.ingest([FIXTURES / "batches" / "depgraph"], CFG, tmp_path / "b")
        d1 = {k: v["sha256"] for k, v in r1.manifest.artifacts.items()}
        d2 = {k: v["sha256"] for k, v in r2.manifest.artifacts.items()}
        assert d1 == d2
        assert r1.manifest.run_id == r2.manifest.run_id


class TestAnalyze:
    def test_reports_written_next_to_store(self, tmp_path):
        ingest = pipeline.ingest([FIXTURES / "batches" / "sentiment"], CFG, tmp_path)
        result = pipeline.analyze(ingest.store_path, CFG)
        assert result.report_json_path.exists()
        assert result.report_md_path.exists()
        flagged = {f.library for f in result.analysis.findings}
        assert {"nltk.sem", "nltk.stem", "nltk.parse", "nltk.tag"} == flagged

    def test_gate_fail_reports_and_exits_zero(self, tmp_path):
        ingest = pipeline.ingest([FIXTURES / "batches" / "gatefail"], CFG, tmp_path)
        code, out, err = run_cli("analyze", str(ingest.store_path))
        assert code == 0
        assert "below threshold" in out
        report = json.loads(ingest.store_path.parent.joinpath("report.json").read_text())
        assert report["findings"] == []
        assert report["gate"]["passes"] is False

    def test_rerun_stable_report_digest(self, tmp_path):
        ingest = pipeline.ingest([FIXTURES / "batches" / "scanner"], CFG, tmp_path)
        r1 = pipeline.analyze(ingest.store_path, CFG, out_dir=tmp_path / "r1")
        r2 = pipeline.analyze(ingest.store_path, CFG, out_dir=tmp_path / "r2")
        assert r1.report_json_path.read_bytes() == r2.report_json_path.read_bytes()


def _demo_workdir(tmp_path) -> tuple[Path, Path]:
    src = tmp_path / "src"
    shutil.copytree(FIXTURES / "demo_app" / "src", src)
    out = tmp_path / "out"
    ingest = pipeline.ingest([FIXTURES / "batches" / "demo"], Config(), out)
    result = pipeline.analyze(ingest.store_path, Config())
    return src, result.report_json_path


class TestOptimize:
    def test_demo_app_patched_and_verified(self, tmp_path):
        src, report = _demo_workdir(tmp_path)
        result = pipeline.optimize(report, src, Config(), out_dir=tmp_path / "out")
        assert result.exit_code == 0
        assert len(result.touched) == 1
        rewritten = (src / "handler.py").read_text(encoding="utf-8")
        assert "# [pgo-deferred] import slowlib" in rewritten
        assert "def cold(payload):\n    import slowlib\n" in rewritten
        patches = list((tmp_path / "out" / "patches").glob("*.patch.json"))
        assert len(patches) == 1

    def test_dry_run_prints_diff_and_writes_nothing(self, tmp_path):
        src, report = _demo_workdir(tmp_path)
        before = (src / "handler.py").read_text(encoding="utf-8")
        code, out, _ = run_cli("optimize", str(report), str(src), "--dry-run")
        assert code == 0
        assert "+    import slowlib" in out
        assert (src / "handler.py").read_text(encoding="utf-8") == before

    def test_absent_library_noop_with_warning(self, tmp_path):
        src, report = _demo_workdir(tmp_path)
        for f in src.glob("*.py"):
            f.write_text("def nothing():\n    return 1\n", encoding="utf-8")
        code, out, err = run_cli("optimize", str(report), str(src))
        assert code == 0
        assert "no imports" in err

    def test_source_drift_raises_stale(self, tmp_path):
        src, report = _demo_workdir(tmp_path)

        def mutate(planned):
            for path, _, _ in planned:
                path.write_text(path.read_text(encoding="utf-8") + "\n# drift\n",
                                encoding="utf-8")

        with pytest.raises(StaleSource):
            pipeline.optimize(report, src, Config(), on_planned=mutate)

    def test_no_findings_report_noop(self, tmp_path):
        ingest = pipeline.ingest([FIXTURES / "batches" / "gatefail"], CFG, tmp_path)
        analyze = pipeline.analyze(ingest.store_path, CFG)
        code, out, _ = run_cli("optimize", str(analyze.report_json_path),
                               str(tmp_path))
        assert code == 0
        assert "nothing to optimize" in out


class TestWatch:
    def test_shifted_trace_triggers_match_oracle(self, tmp_path):
        trace = tmp_path / "trace.csv"
        write_trace_csv(trace, SimulationSpec(entry_points=6, windows=30,
                                              shift_windows=(6, 19), seed=7))
        result = pipeline.watch(trace, Config(), tmp_path / "out")
        lines = result.triggers_path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert result.timeline.fired_window_indices() == [6, 19]
        for line in lines:
            record = json.loads(line)
            assert record["fired"] is True
            assert record["total_delta"] > 0.002

    def test_stable_trace_empty_triggers_file(self, tmp_path):
        trace = tmp_path / "trace.csv"
        write_trace_csv(trace, SimulationSpec(entry_points=6, windows=10, seed=1))
        result = pipeline.watch(trace, Config(), tmp_path / "out")
        assert result.triggers_path.exists()
        assert result.triggers_path.read_text(encoding="utf-8") == ""

    def test_malformed_row_counted(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        write_trace_csv(trace, SimulationSpec(entry_points=2, windows=4, seed=2))
        lines = trace.read_text().splitlines()
        lines.insert(1, "sim,epX,bogus,1")
        trace.write_text("\n".join(lines) + "\n")
        result = pipeline.watch(trace, Config(), tmp_path / "out")
        assert result.malformed_rows == 1
        assert "skipped 1 malformed" in capsys.readouterr().err

    def test_auto_runs_analysis_per_trigger(self, tmp_path):
        trace = tmp_path / "trace.csv"
        write_trace_csv(trace, SimulationSpec(entry_points=4, windows=12,
                                              shift_windows=(5,), seed=4))
        ingest = pipeline.ingest([FIXTURES / "batches" / "demo"], Config(), tmp_path / "o")
        src = tmp_path / "src"
        shutil.copytree(FIXTURES / "demo_app" / "src", src)
        result = pipeline.watch(trace, Config(), tmp_path / "watch-out", auto=True,
                                store_path=ingest.store_path, src_root=src)
        assert len(result.fired) == 1
        assert (tmp_path / "watch-out" / "report.json").exists()
        assert "# [pgo-deferred] import slowlib" in (src / "handler.py").read_text()


class TestCliSurface:
    def test_usage_error_exit_1(self):
        code, _, err = run_cli("frobnicate")
        assert code == 1

    def test_missing_required_arg_exit_1(self):
        code, _, _ = run_cli("analyze")
        assert code == 1

    def test_bad_config_exit_2(self, tmp_path):
        bad = tmp_path / "cfg.json"
        bad.write_text('{"warp_speed": 11}', encoding="utf-8")
        code, _, err = run_cli("--config", str(bad), "simulate",
                               "--out-file", str(tmp_path / "t.csv"))
        assert code == 2
        assert "warp_speed" in err

    def test_missing_store_exit_2(self, tmp_path):
        code, _, _ = run_cli("analyze", str(tmp_path / "missing.jsonl"))
        assert code == 2

    def test_full_cli_loop(self, tmp_path):
        cfg = write_app_config(tmp_path)
        code, out, _ = run_cli("--config", str(cfg), "ingest",
                               str(FIXTURES / "batches" / "sentiment"),
                               "--out", str(tmp_path / "out"))
        assert code == 0
        store = next((tmp_path / "out").rglob("store.pgoprof.jsonl"))
        code, out, _ = run_cli("--config", str(cfg), "analyze", str(store))
        assert code == 0
        assert "nltk.sem" in out
        report = store.parent / "report.json"
        code, out, _ = run_cli("report", str(report))
        assert code == 0
        assert "| Package |" in out

    def test_simulate_deterministic_cli(self, tmp_path):
        args = ("simulate", "--seed", "7", "--windows", "8", "--shift-at", "4",
                "--out-file", str(tmp_path / "t1.csv"))
        assert run_cli(*args)[0] == 0
        args2 = ("simulate", "--seed", "7", "--windows", "8", "--shift-at", "4",
                 "--out-file", str(tmp_path / "t2.csv"))
        assert run_cli(*args2)[0] == 0
        assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t2.csv").read_bytes()
