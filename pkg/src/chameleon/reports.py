"""Serialization of experiment reports to JSON and CSV.

A report is a command name, its parameters, the master seed and a list of flat
or nested records.  Every CSV row repeats the tool version, the seed and the
parameters; JSON is the lossless form and round-trips through
:func:`Report.from_json`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from . import __version__

TOOL = "chameleon"


def _clean(value):
    """Make a value JSON-safe and stable: tuples become lists, numpy scalars plain Python, NaN None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "tolist"):
        return _clean(value.tolist())
    if hasattr(value, "value") and hasattr(value, "name"):  # enums
        return _clean(value.value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, allow_nan=True)
    if value is None:
        return ""
    return str(value)


@dataclass
class Report:
    command: str
    params: dict
    seed: int | None = None
    records: list[dict] = field(default_factory=list)
    passed: bool = True
    version: str = __version__
    tool: str = TOOL

    def __post_init__(self):
        self.params = _clean(self.params)
        self.records = [_clean(r) for r in self.records]
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return {"tool": self.tool, "version": self.version, "command": self.command, "seed": self.seed,
                "params": self.params, "passed": self.passed, "records": self.records}

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(d["command"], d["params"], d["seed"], d["records"], d["passed"], d["version"], d["tool"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    def csv_columns(self) -> list[str]:
        cols: list[str] = []
        for r in self.records:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return ["tool_version", "seed"] + [f"param.{k}" for k in sorted(self.params)] + cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.csv_columns()
        w.writerow(cols)
        head = [self.version, _cell(self.seed)] + [_cell(self.params[k]) for k in sorted(self.params)]
        n_meta = len(head)
        for r in self.records:
            w.writerow(head + [_cell(r.get(c)) for c in cols[n_meta:]])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")


def write_text(text: str, path: str | None, stream=None):
    """Write UTF-8 text with LF line endings to ``path`` or to ``stream``."""
    if path is None or path == "-":
        stream.write(text)
        stream.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
