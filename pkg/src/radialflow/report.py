"""Line-oriented report records: one ``key=value`` record per line.

Floats are written with ``repr`` so every value round-trips exactly and
reports are byte-stable across runs. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, TextIO

ANGLE_NOTE = "# angles in radians, V = |V| exp(-j*angle_rad); all quantities per-unit"


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if not text or any(ch.isspace() or ch == "=" for ch in text):
        raise ValueError(f"report value {text!r} must be a non-empty token")
    return text


def _plain(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def format_record(kind: str, **fields: Any) -> str:
    parts = [f"kind={kind}"]
    parts.extend(f"{key}={_fmt(value)}" for key, value in fields.items())
    return " ".join(parts)


def parse_record(line: str) -> dict[str, str]:
    """Inverse of :func:`format_record`; values stay strings."""
    out = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"malformed report token {token!r}")
        out[key] = value
    return out


class Report:
    """Collects report lines and structured records for the JSON document."""

    def __init__(self, command: str):
        self.command = command
        self.lines: list[str] = []
        self.records: list[dict[str, Any]] = []

    def comment(self, text: str) -> None:
        self.lines.append(text if text.startswith("#") else f"# {text}")

    def add(self, kind: str, **fields: Any) -> None:
        self.lines.append(format_record(kind, **fields))
        self.records.append({"kind": kind, **fields})

    def write(self, stream: TextIO) -> None:
        for line in self.lines:
            stream.write(line + "\n")

    def save_json(self, path: str | Path) -> None:
        doc = {"command": self.command, "records": self.records}
        Path(path).write_text(json.dumps(doc, indent=2, default=_plain) + "\n")
