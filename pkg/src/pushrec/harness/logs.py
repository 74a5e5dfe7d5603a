"""Versioned JSON-lines log files (metrics streams and trajectory logs).

Every file starts with a header record carrying a format version; readers
reject unknown versions rather than guessing.  Floats survive the round trip
bit-exactly (json uses repr), which the replay machinery relies on.
"""

from __future__ import annotations

import json
from pathlib import Path

METRICS_VERSION = 1
TRAJECTORY_VERSION = 1
REPORT_VERSION = 1


class LogFormatError(ValueError):
    pass


class JsonlWriter:
    def __init__(self, path, kind: str, version: int, **header_fields):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")
        self.write({"type": "header", "kind": kind, "version": version,
                    **header_fields})

    def write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_jsonl(path, kind: str, version: int) -> tuple[dict, list[dict]]:
    """Header + records of a versioned JSONL file; rejects unknown versions."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise LogFormatError(f"{path}: missing header record")
    header = lines[0]
    if header.get("kind") != kind:
        raise LogFormatError(
            f"{path}: expected kind {kind!r}, found {header.get('kind')!r}")
    if header.get("version") != version:
        raise LogFormatError(
            f"{path}: unsupported {kind} version {header.get('version')!r}, "
            f"reader supports {version}")
    return header, lines[1:]
