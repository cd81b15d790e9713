"""Tests for contact_hj.logging_setup."""

from __future__ import annotations

import tests._path_setup  # noqa: F401

import logging
from pathlib import Path
from unittest.mock import patch

import pytest

from contact_hj.logging_setup import _PACKAGE, configure


@pytest.fixture(autouse=True)
def _clean_logger():
    """Reset the package logger between tests."""
    pkg = logging.getLogger(_PACKAGE)
    pkg.handlers.clear()
    pkg.setLevel(logging.WARNING)
    yield
    pkg.handlers.clear()
    pkg.setLevel(logging.WARNING)


class TestConfigure:
    def test_attaches_file_and_stderr_handlers(self, tmp_path: Path):
        configure(tmp_path / "run.log", debug=True)
        pkg = logging.getLogger(_PACKAGE)
        handler_types = {type(h).__name__ for h in pkg.handlers}
        assert handler_types == {"RotatingFileHandler", "StreamHandler"}

    def test_without_log_file_only_stderr(self):
        configure(None)
        pkg = logging.getLogger(_PACKAGE)
        assert [type(h).__name__ for h in pkg.handlers] == ["StreamHandler"]
        assert pkg.handlers[0].level == logging.WARNING

    def test_idempotent_without_reconfigure(self, tmp_path: Path):
        configure(tmp_path / "run.log")
        configure(tmp_path / "other.log")
        assert len(logging.getLogger(_PACKAGE).handlers) == 2
        assert not (tmp_path / "other.log").exists()

    def test_reconfigure_moves_the_run_log(self, tmp_path: Path):
        configure(None)
        configure(tmp_path / "out" / "contact-hj.log", reconfigure=True)
        pkg = logging.getLogger(_PACKAGE)
        assert len(pkg.handlers) == 2
        assert (tmp_path / "out").is_dir()

    def test_levels(self, tmp_path: Path):
        configure(tmp_path / "run.log", debug=False)
        assert logging.getLogger(_PACKAGE).level == logging.INFO
        configure(tmp_path / "run.log", debug=True, reconfigure=True)
        assert logging.getLogger(_PACKAGE).level == logging.DEBUG

    def test_file_handler_failure_prints_to_stderr(self, capsys):
        with patch("contact_hj.logging_setup.Path.mkdir", side_effect=OSError("permission denied")):
            configure(Path("/nonexistent/out/contact-hj.log"))
        captured = capsys.readouterr()
        assert "contact-hj: WARNING" in captured.err
        assert "permission denied" in captured.err
        assert len(logging.getLogger(_PACKAGE).handlers) == 1

    def test_writes_records_from_submodules(self, tmp_path: Path):
        log_file = tmp_path / "run.log"
        configure(log_file, debug=True)
        logging.getLogger(f"{_PACKAGE}.reconstruct").debug("W built from base point %s", [0.0, 0.0])
        for h in logging.getLogger(_PACKAGE).handlers:
            h.flush()
        assert "W built from base point [0.0, 0.0]" in log_file.read_text()

    def test_propagate_is_false(self, tmp_path: Path):
        configure(tmp_path / "run.log")
        assert logging.getLogger(_PACKAGE).propagate is False
