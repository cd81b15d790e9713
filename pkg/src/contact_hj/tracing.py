"""OpenTelemetry spans for run tasks and pipeline stages."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Any, Iterator

from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, SimpleSpanProcessor, SpanExporter
from opentelemetry.trace import Span

logger = logging.getLogger(__name__)

SERVICE_NAME = "contact-hj"


class Telemetry:
    """Own TracerProvider; spans are dropped unless an exporter is attached."""

    def __init__(self, endpoint: str | None = None, *, exporter: SpanExporter | None = None) -> None:
        provider = TracerProvider(resource=Resource.create({"service.name": SERVICE_NAME}))
        if endpoint:
            from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter

            provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=endpoint)))
            logger.debug("exporting spans to %s", endpoint)
        if exporter is not None:
            provider.add_span_processor(SimpleSpanProcessor(exporter))
        self._provider = provider
        self._tracer = provider.get_tracer(SERVICE_NAME)

    @contextmanager
    def task(self, name: str) -> Iterator[Span]:
        with self._tracer.start_as_current_span(f"task {name}", attributes={"task.name": name}) as span:
            yield span

    @contextmanager
    def stage(self, name: str, **attributes: Any) -> Iterator[Span]:
        attrs = {f"stage.{k}": _attribute(v) for k, v in attributes.items()}
        with self._tracer.start_as_current_span(f"stage {name}", attributes=attrs) as span:
            yield span

    def flush(self) -> None:
        self._provider.force_flush()

    def shutdown(self) -> None:
        self._provider.shutdown()


def _attribute(value: Any) -> Any:
    if isinstance(value, (bool, int, float, str)):
        return value
    return str(value)


def finish_task_span(span: Span, status: str, elapsed: float, residual: float | None) -> None:
    span.set_attribute("task.status", status)
    span.set_attribute("task.elapsed_s", elapsed)
    if residual is not None:
        span.set_attribute("task.max_residual", residual)
