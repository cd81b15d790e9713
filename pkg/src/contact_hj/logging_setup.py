"""Logging for contact-hj runs: a rotating run log plus warnings on stderr."""

from __future__ import annotations

import logging
import logging.handlers
import sys
from pathlib import Path

_PACKAGE = "contact_hj"
_PREFIX = "contact-hj: "
_LOG_BYTES = 1 * 1024 * 1024
_LOG_BACKUPS = 3
_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"


def _file_handler(log_file: Path) -> logging.Handler | None:
    try:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=_LOG_BYTES,
            backupCount=_LOG_BACKUPS,
            encoding="utf-8",
        )
    except OSError as exc:
        print(f"{_PREFIX}WARNING: could not open log file {log_file}: {exc}", file=sys.stderr)
        return None
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATEFMT))
    return handler


def configure(log_file: Path | None, *, debug: bool = False, reconfigure: bool = False) -> None:
    """Attach handlers to the contact_hj package logger.

    The run log gets every record at or above the package level; stderr only
    sees warnings. Without ``log_file`` only the stderr handler is attached.
    Idempotent unless *reconfigure* is True.
    """
    pkg_logger = logging.getLogger(_PACKAGE)
    if pkg_logger.handlers and not reconfigure:
        return
    for handler in list(pkg_logger.handlers):
        pkg_logger.removeHandler(handler)
        handler.close()

    pkg_logger.setLevel(logging.DEBUG if debug else logging.INFO)

    if log_file is not None:
        fh = _file_handler(log_file)
        if fh is not None:
            pkg_logger.addHandler(fh)

    sh = logging.StreamHandler(sys.stderr)
    sh.setLevel(logging.WARNING)
    sh.setFormatter(logging.Formatter(f"{_PREFIX}%(message)s"))
    pkg_logger.addHandler(sh)

    pkg_logger.propagate = False
