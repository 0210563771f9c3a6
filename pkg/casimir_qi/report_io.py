"""Report writers. JSON is one object with insertion-ordered keys; CSV is the `rows` table."""
import io
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import click
import orjson
import pandas as pd

from casimir_qi.errors import OutputError

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE | orjson.OPT_SERIALIZE_NUMPY


def to_json_bytes(payload: Dict[str, Any]) -> bytes:
    """Non-finite floats become null."""
    return orjson.dumps(payload, option=JSON_OPTIONS)


def to_csv_text(report: Dict[str, Any]) -> str:
    rows = report.get("rows") or []
    frame = pd.DataFrame(rows)
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def sidecar_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}.config.json")


def _write(path: Path, data: bytes) -> None:
    try:
        path.write_bytes(data)
    except OSError as e:
        raise OutputError(f"cannot write report to {path}: {e.strerror or e}", path=str(path)) from e


def emit(report: Dict[str, Any], fmt: str = "json", path: Optional[str] = None) -> None:
    """Write the report to `path`, or to stdout when no path is given.

    A CSV report writes its resolved config next to the table as <stem>.config.json.
    Error reports are always JSON.
    """
    if fmt == "csv" and report.get("status") != "error":
        data = to_csv_text(report).encode("utf-8")
    else:
        data = to_json_bytes(report)

    if path is None:
        click.echo(data, nl=False)
        return

    target = Path(path)
    _write(target, data)
    if fmt == "csv" and report.get("status") != "error":
        _write(sidecar_path(target), to_json_bytes({"config": report.get("config")}))
    logger.info("Wrote %s report to %s", fmt, target)
