"""Trajectory files: CSV and JSON with full double precision."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np

from contact_hj.file_io import atomic_write
from contact_hj.refint import Trajectory

logger = logging.getLogger(__name__)

Format = Literal["csv", "json"]
FORMATS = ("csv", "json")


def _number(value: float) -> str:
    return format(float(value), ".17g")


def to_jsonable(value: Any) -> Any:
    """numpy scalars and arrays, tuples and sets made JSON-serializable."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def export_trajectory(trajectory: Trajectory, path: Path, fmt: Format = "csv", names: Sequence[str] = ()) -> Path:
    """Write one row per grid point; columns are t then the chart coordinates."""
    names = list(names) or [f"m{i}" for i in range(1, trajectory.dim + 1)]
    if len(names) != trajectory.dim:
        raise ValueError(f"{len(names)} column names for a trajectory of dimension {trajectory.dim}")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", *names])
        for t, point in zip(trajectory.times, trajectory.points):
            writer.writerow([_number(t), *(_number(v) for v in point)])
        payload = buf.getvalue()
    elif fmt == "json":
        doc = {
            "meta": to_jsonable({"method": trajectory.method, "names": names, **trajectory.metadata}),
            "t": trajectory.times.tolist(),
            "points": trajectory.points.tolist(),
        }
        payload = json.dumps(doc, indent=2) + "\n"
    else:
        raise ValueError(f"Unknown format: {fmt}. Available: {list(FORMATS)}")
    atomic_write(path, payload)
    logger.debug("wrote %d rows to %s", len(trajectory), path)
    return path


def load_trajectory(path: Path) -> tuple[Trajectory, list[str]]:
    """Read a file written by export_trajectory; the format follows the suffix."""
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        doc = json.loads(text)
        meta = dict(doc.get("meta", {}))
        names = list(meta.pop("names", []))
        method = str(meta.pop("method", "file"))
        return Trajectory(np.array(doc["t"], dtype=float), np.array(doc["points"], dtype=float), method, meta), names
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise ValueError(f"{path} has no 't,...' header")
    header, body = rows[0], [r for r in rows[1:] if r]
    data = np.array([[float(v) for v in row] for row in body], dtype=float).reshape(len(body), len(header))
    return Trajectory(data[:, 0], data[:, 1:], "file", {"source": str(path)}), header[1:]
