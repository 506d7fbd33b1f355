"""Atomic file output, CSV helpers and run manifests."""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import sys
import tempfile
from pathlib import Path

from . import __version__


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(value) -> str:
    """Round-trip decimal text (17 significant digits for floats)."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return f"{float(value):.17g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, rows))


def manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def write_manifest(output, command: str, inputs: dict, results: dict | None = None) -> Path:
    """Record everything needed to regenerate ``output`` next to it."""
    record = {
        "tool": "qspi",
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "results": results or {},
        "output": Path(output).name,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
    }
    target = manifest_path(output)
    atomic_write_text(target, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return target


def read_manifest(output) -> dict:
    return json.loads(manifest_path(output).read_text(encoding="utf-8"))
