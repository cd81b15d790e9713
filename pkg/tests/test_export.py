from __future__ import annotations

import tests._path_setup  # noqa: F401

import json
import math
from pathlib import Path

import numpy as np
import pytest

from contact_hj.export import export_trajectory, load_trajectory, to_jsonable
from contact_hj.file_io import atomic_write
from contact_hj.refint import Trajectory, compare, time_grid


def _reeb_trajectory() -> Trajectory:
    times = time_grid(0.003, 1e-3)
    points = np.column_stack([np.full(4, 0.2), np.full(4, 0.5), 0.1 + times])
    return Trajectory(times, points, "quadrature", {"lambda": [0.2], "h": 1.0})


class TestExport:
    def test_csv_rows_and_header(self, tmp_path: Path) -> None:
        path = export_trajectory(_reeb_trajectory(), tmp_path / "reconstruct.csv", "csv", ("x1", "y1", "z"))
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x1,y1,z"
        assert len(lines) == 5
        assert lines[1] == "0,0.20000000000000001,0.5,0.10000000000000001"

    def test_csv_keeps_full_precision(self, tmp_path: Path) -> None:
        original = _reeb_trajectory()
        loaded, names = load_trajectory(export_trajectory(original, tmp_path / "a.csv"))
        assert names == ["m1", "m2", "m3"]
        assert loaded.method == "file"
        np.testing.assert_array_equal(loaded.points, original.points)
        np.testing.assert_array_equal(loaded.times, original.times)

    def test_json_carries_metadata(self, tmp_path: Path) -> None:
        path = export_trajectory(_reeb_trajectory(), tmp_path / "a.json", "json", ("q", "p", "s"))
        doc = json.loads(path.read_text())
        assert doc["meta"]["method"] == "quadrature"
        assert doc["meta"]["h"] == 1.0
        loaded, names = load_trajectory(path)
        assert names == ["q", "p", "s"]
        assert loaded.method == "quadrature"
        assert loaded.metadata["lambda"] == [0.2]

    def test_loaded_files_compare(self, tmp_path: Path) -> None:
        a, _ = load_trajectory(export_trajectory(_reeb_trajectory(), tmp_path / "a.csv"))
        b, _ = load_trajectory(export_trajectory(_reeb_trajectory(), tmp_path / "b.json", "json"))
        assert compare(a, b).max_abs == 0.0

    def test_rejects_bad_arguments(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError):
            export_trajectory(_reeb_trajectory(), tmp_path / "a.csv", names=("x1",))
        with pytest.raises(ValueError):
            export_trajectory(_reeb_trajectory(), tmp_path / "a.npz", "npz")  # type: ignore[arg-type]
        assert not (tmp_path / "a.npz").exists()

    def test_no_temp_file_left_behind(self, tmp_path: Path) -> None:
        export_trajectory(_reeb_trajectory(), tmp_path / "a.csv")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv"]

    def test_failed_write_removes_temp_file(self, tmp_path: Path) -> None:
        with pytest.raises(TypeError):
            atomic_write(tmp_path / "report.json", 12345)  # type: ignore[arg-type]
        assert list(tmp_path.iterdir()) == []

    def test_csv_needs_a_time_header(self, tmp_path: Path) -> None:
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            load_trajectory(path)


def test_to_jsonable() -> None:
    value = {"a": np.float64(1.5), "b": np.arange(2), "c": (1, math.inf), 3: {"nan": math.nan}}
    assert to_jsonable(value) == {"a": 1.5, "b": [0, 1], "c": [1, "inf"], "3": {"nan": "nan"}}
