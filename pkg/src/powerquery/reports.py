"""Deterministic CSV/JSON rendering for run reports.

Floats are always written with 17 significant digits so that payloads round
trip losslessly and identical runs produce identical bytes.  Dictionaries are
rendered in insertion order; no timestamps or timings ever enter a payload.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__version__ = "0.1.0"


def format_number(value) -> str:
    """Exact-width numeric rendering: ints verbatim, floats at 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def render_json(value, indent: int = 0) -> str:
    """Deterministic JSON with controlled float formatting."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {render_json(v, indent + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        items = list(value)
        if not items:
            return "[]"
        rendered = [render_json(v, indent + 1) for v in items]
        if all(len(r) <= 24 and "\n" not in r for r in rendered) and len(items) <= 64:
            return "[" + ", ".join(rendered) + "]"
        return "[\n" + ",\n".join(inner + r for r in rendered) + "\n" + pad + "]"
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_, int, np.integer, float, np.floating)):
        return format_number(value)
    if isinstance(value, (complex, np.complexfloating)):
        return f"[{format_number(value.real)}, {format_number(value.imag)}]"
    return json.dumps(str(value))


def render_csv(header: list[str], rows) -> str:
    """CSV text with '\\n' newlines and deterministic float formatting."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            else:
                cells.append(format_number(cell))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass
class RunReport:
    """One CLI run: echoed configuration, results, per-phase timings, version.

    The serialized payload covers config, results, and version; timings are
    reported on stderr only so that identical configurations yield identical
    payload bytes.
    """

    command: str
    config: dict
    results: dict
    csv_header: list[str] | None = None
    csv_rows: list | None = None
    timings: dict = field(default_factory=dict)
    version: str = __version__
    exit_code: int = 0

    def payload(self, fmt: str) -> str:
        if fmt == "json":
            doc = {
                "command": self.command,
                "config": self.config,
                "results": self.results,
                "version": self.version,
            }
            return render_json(doc) + "\n"
        if fmt == "csv":
            if self.csv_header is None:
                raise ValidationError(f"command {self.command!r} has no CSV form")
            return render_csv(self.csv_header, self.csv_rows or [])
        raise ValidationError(f"unknown output format {fmt!r}")


class PhaseTimer:
    """Wall-clock phases for stderr diagnostics; never part of a payload."""

    def __init__(self):
        self.timings = {}
        self._mark = time.perf_counter()

    def lap(self, name: str):
        now = time.perf_counter()
        self.timings[name] = self.timings.get(name, 0.0) + (now - self._mark)
        self._mark = now


def emit_report(report: RunReport, fmt: str, path: str | None):
    """Write the payload to stdout or a file; timings go to stderr."""
    text = report.payload(fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    for name, seconds in report.timings.items():
        print(f"timing {name}={seconds:.3f}s", file=sys.stderr)
