"""Table writers and run manifests shared by the CLI commands."""

from __future__ import annotations

import csv
from datetime import datetime, timezone
import io
import json
import os
from pathlib import Path

from cvbell import __version__


def manifest(command: str, parameters: dict) -> dict:
    """Run metadata; SOURCE_DATE_EPOCH pins the timestamp for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return {
        "command": command,
        "parameters": parameters,
        "tool_version": __version__,
        "timestamp": now.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "basis_ordering": "|0>, |1>, ..., |2M-1> per mode; field (x) atom_1 (x) ... for readout",
    }


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def render_json(meta: dict, rows) -> str:
    return json.dumps({"manifest": meta, "rows": list(rows)}, indent=2) + "\n"


def write_table(path: str | None, fmt: str, columns, rows, meta: dict, stream) -> None:
    """Write rows as CSV or JSON to ``path`` (or ``stream`` when path is None).

    CSV files get a ``<path>.manifest.json`` sidecar; JSON embeds the manifest.
    """
    rows = [{c: row[c] for c in columns} for row in rows]
    text = render_csv(columns, rows) if fmt == "csv" else render_json(meta, rows)
    if path is None:
        stream.write(text)
        return
    target = Path(path)
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    if fmt == "csv":
        sidecar = target.with_name(target.name + ".manifest.json")
        with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(meta, indent=2) + "\n")
