from __future__ import annotations

import tests._path_setup  # noqa: F401

from opentelemetry.sdk.trace.export.in_memory_span_exporter import InMemorySpanExporter

from contact_hj.tracing import SERVICE_NAME, Telemetry, finish_task_span


class TestTelemetry:
    def test_task_and_stage_spans(self) -> None:
        exporter = InMemorySpanExporter()
        telemetry = Telemetry(exporter=exporter)
        with telemetry.task("verify") as span:
            with telemetry.stage("pseudo-isotropy", samples=12, box=[[0, 1]]):
                pass
            finish_task_span(span, "passed", 0.25, 1e-12)
        telemetry.flush()

        spans = {s.name: s for s in exporter.get_finished_spans()}
        assert set(spans) == {"task verify", "stage pseudo-isotropy"}
        task = spans["task verify"]
        assert task.attributes["task.name"] == "verify"
        assert task.attributes["task.status"] == "passed"
        assert task.attributes["task.max_residual"] == 1e-12
        assert task.resource.attributes["service.name"] == SERVICE_NAME
        stage = spans["stage pseudo-isotropy"]
        assert stage.parent.span_id == task.context.span_id
        assert stage.attributes["stage.samples"] == 12
        assert stage.attributes["stage.box"] == "[[0, 1]]"
        telemetry.shutdown()

    def test_missing_residual_is_not_recorded(self) -> None:
        exporter = InMemorySpanExporter()
        telemetry = Telemetry(exporter=exporter)
        with telemetry.task("compare") as span:
            finish_task_span(span, "skipped", 0.0, None)
        (finished,) = exporter.get_finished_spans()
        assert "task.max_residual" not in finished.attributes

    def test_without_exporter_spans_are_dropped(self) -> None:
        telemetry = Telemetry()
        with telemetry.task("verify"):
            pass
        telemetry.shutdown()
