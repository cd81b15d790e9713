from __future__ import annotations

import tests._path_setup  # noqa: F401

import json
from pathlib import Path
from typing import Any

import pytest
from opentelemetry.sdk.trace.export.in_memory_span_exporter import InMemorySpanExporter

from contact_hj import config as cfg
from contact_hj import runner
from contact_hj.refint import Trajectory
from contact_hj.runner import (
    ERROR,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VERIFY,
    FAILED,
    PASSED,
    SKIPPED,
    RunReport,
    TaskResult,
    run,
)
from contact_hj.tracing import Telemetry

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _load(name: str, out: Path, **overrides: Any) -> cfg.RunConfig:
    return cfg.load_config(CONFIGS / f"{name}.toml", cfg.merge({"output": {"dir": str(out)}}, overrides))


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch: pytest.MonkeyPatch):
    for var in ("CONTACT_HJ_SEED", "CONTACT_HJ_DEBUG", "CONTACT_HJ_OUT", "CONTACT_HJ_WORKERS", "OTEL_EXPORTER_OTLP_ENDPOINT"):
        monkeypatch.delenv(var, raising=False)


class TestReebRun:
    def test_all_tasks_pass(self, tmp_path: Path) -> None:
        report = run(_load("reeb_flow", tmp_path))
        assert [t.status for t in report.tasks] == [PASSED] * 4, [t.to_dict() for t in report.tasks]
        assert report.exit_code == EXIT_OK
        assert report.task("integrate").residuals["region"] == "M2"
        assert report.task("compare").residuals["reconstruct_vs_rk4"] < 1e-9
        assert report.task("compare").residuals["integrate_vs_rk4"] < 1e-9

    def test_artifacts(self, tmp_path: Path) -> None:
        run(_load("reeb_flow", tmp_path))
        lines = (tmp_path / "reconstruct.csv").read_text().splitlines()
        assert lines[0] == "t,x1,y1,z"
        assert len(lines) == 5
        assert (tmp_path / "rk4.csv").exists()
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["exit_code"] == 0
        assert doc["family"] == "raw"
        assert list(doc["tasks"]) == ["verify", "reconstruct", "integrate", "compare"]
        assert "H = \"1\"" in (tmp_path / "config.resolved.toml").read_text()

    def test_json_output(self, tmp_path: Path) -> None:
        run(_load("reeb_flow", tmp_path, output={"format": "json"}, tasks={"run": ["verify", "reconstruct"]}))
        doc = json.loads((tmp_path / "reconstruct.json").read_text())
        assert doc["meta"]["names"] == ["x1", "y1", "z"]
        assert doc["meta"]["g_mode"] == "none"

    def test_spans(self, tmp_path: Path) -> None:
        exporter = InMemorySpanExporter()
        run(_load("reeb_flow", tmp_path, tasks={"run": ["verify"]}), telemetry=Telemetry(exporter=exporter))
        names = {s.name for s in exporter.get_finished_spans()}
        assert {"task verify", "stage complete_solution_check", "stage pseudo_isotropy"} <= names


class TestFailures:
    def test_broken_solution_fails_verify_and_skips_reconstruct(self, tmp_path: Path) -> None:
        report = run(_load("broken_solution", tmp_path))
        verify, reconstruct = report.tasks
        assert verify.status == FAILED
        assert any("pseudo-isotropy" in f for f in verify.failures)
        assert verify.residuals["max_pseudo_isotropy"] == pytest.approx(1.0)
        assert reconstruct.status == SKIPPED
        assert report.exit_code == EXIT_VERIFY
        assert not (tmp_path / "reconstruct.csv").exists()
        assert (tmp_path / "report.json").exists()

    def test_precondition_outside_verify_is_numerical(self, tmp_path: Path) -> None:
        config = _load("thermo_a0", tmp_path, integration={"g_mode": "none"}, tasks={"run": ["reconstruct"]})
        report = run(config)
        (result,) = report.tasks
        assert result.status == ERROR
        assert result.exit_code == EXIT_NUMERICAL
        assert result.residuals["pseudo-isotropy"] > 1e-8

    def test_compare_beyond_tolerance_is_numerical(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        original = runner.split_and_integrate

        def shifted(*args: Any, **kwargs: Any) -> Trajectory:
            t = original(*args, **kwargs)
            return Trajectory(t.times, t.points + 1e-3, t.method, t.metadata)

        monkeypatch.setattr(runner, "split_and_integrate", shifted)
        report = run(_load("reeb_flow", tmp_path, tasks={"run": ["verify", "integrate", "compare"]}))
        compare = report.task("compare")
        assert compare.status == FAILED
        assert compare.exit_code == EXIT_NUMERICAL
        assert compare.residuals["integrate_vs_rk4"] == pytest.approx(1e-3)
        assert "integrate differs from RK4" in compare.failures[0]
        assert report.exit_code == EXIT_NUMERICAL

    def test_first_integral_drift_is_numerical(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        original = runner.rk4

        def tilted(*args: Any, **kwargs: Any) -> Trajectory:
            t = original(*args, **kwargs)
            points = t.points.copy()
            points[:, 0] += t.times
            return Trajectory(t.times, points, t.method, t.metadata)

        monkeypatch.setattr(runner, "rk4", tilted)
        report = run(_load("reeb_flow", tmp_path, tasks={"run": ["first-integrals"]}))
        (result,) = report.tasks
        assert result.status == FAILED
        assert result.exit_code == EXIT_NUMERICAL
        assert result.residuals["max_drift"] == pytest.approx(3e-3)

    def test_first_integrals_hold_along_reeb_flow(self, tmp_path: Path) -> None:
        report = run(_load("reeb_flow", tmp_path, tasks={"run": ["first-integrals"]}))
        (result,) = report.tasks
        assert result.status == PASSED
        assert result.residuals["max_drift"] < 1e-12

    def test_liouville_verify(self, tmp_path: Path) -> None:
        report = run(_load("liouville_sphere", tmp_path, grid={"samples": 10}))
        (result,) = report.tasks
        assert result.status == PASSED
        assert result.residuals["reeb_alignment"] < 1e-9


class TestReport:
    def test_exit_code_precedence(self) -> None:
        def report(*codes: int) -> RunReport:
            return RunReport("raw", None, [TaskResult(f"t{i}", exit_code=c) for i, c in enumerate(codes)])

        assert report().exit_code == EXIT_OK
        assert report(EXIT_VERIFY, EXIT_NUMERICAL).exit_code == EXIT_NUMERICAL
        assert report(EXIT_NUMERICAL, EXIT_CONFIG, EXIT_VERIFY).exit_code == EXIT_CONFIG

    def test_worst_residual_skips_minima_and_locations(self) -> None:
        result = TaskResult("verify", residuals={"min_abs_det": 5.0, "compare_at": 9.0, "max_hje": 1e-12, "region": "M2"})
        assert result.worst_residual == 1e-12
        assert TaskResult("compare").worst_residual is None
