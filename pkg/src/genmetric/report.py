"""RunReport assembly and JSON emission.

Reports serialize with a fixed key order and every float rendered with 17
significant digits, so identical inputs produce byte-identical JSON and all
values round-trip losslessly. Non-finite floats use the JS-style tokens
(`Infinity`, `-Infinity`, `NaN`) that Python's json parser accepts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

import jsonschema

from .errors import ValidationError
from .metrics import MetricReport
from .monitoring import MonitorConfig, MonitorState, TuningResult

TOOL_VERSION = "0.1.0"


def format_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x == float("inf"):
        return "Infinity"
    if x == float("-inf"):
        return "-Infinity"
    s = "%.17g" % x
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def dumps(obj, indent: int | None = None) -> str:
    """Serialize to JSON with 17-significant-digit floats, preserving order."""
    out: list[str] = []
    _write(obj, out, indent, 0)
    return "".join(out)


def _write(obj, out: list[str], indent: int | None, depth: int) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        _write_seq(
            ((json.dumps(str(k)) + (": " if indent else ":"), v) for k, v in obj.items()),
            len(obj), "{}", out, indent, depth,
        )
    elif isinstance(obj, (list, tuple)):
        _write_seq((("", v) for v in obj), len(obj), "[]", out, indent, depth)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_seq(items, count, brackets, out, indent, depth) -> None:
    if count == 0:
        out.append(brackets)
        return
    open_b, close_b = brackets
    pad = "\n" + " " * (indent * (depth + 1)) if indent else ""
    end_pad = "\n" + " " * (indent * depth) if indent else ""
    out.append(open_b)
    for i, (prefix, value) in enumerate(items):
        out.append(("," if i else "") + pad + prefix)
        _write(value, out, indent, depth + 1)
    out.append(end_pad + close_b)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:12]


def bytes_digest(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class RunReport:
    """Everything one CLI invocation computed, ready for JSON emission."""

    subcommand: str
    inputs: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    monitor: MonitorState | None = None
    monitor_config: MonitorConfig | None = None
    tuning: TuningResult | None = None
    timestamp: str | None = None
    tool_version: str = TOOL_VERSION

    def add_input(self, path: str, digest: str) -> None:
        self.inputs.append({"path": str(path), "digest": digest})

    def add(self, report: MetricReport) -> None:
        self.reports.append(report)

    def stamp(self) -> None:
        self.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def to_dict(self) -> dict:
        doc = {
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "inputs": list(self.inputs),
            "reports": [r.to_dict() for r in self.reports],
        }
        if self.timestamp is not None:
            doc["timestamp"] = self.timestamp
        if self.monitor is not None:
            snap = self.monitor.to_dict()
            if self.monitor_config is not None:
                snap["config"] = {
                    "epsilon": self.monitor_config.epsilon,
                    "patience": self.monitor_config.patience,
                    "min_epochs": self.monitor_config.min_epochs,
                    "gate_threshold": self.monitor_config.gate.threshold_T,
                }
            doc["monitor"] = snap
        if self.tuning is not None:
            doc["tuning"] = self.tuning.to_dict()
        return doc

    def to_json(self, indent: int | None = None) -> str:
        return dumps(self.to_dict(), indent=indent)


def load_schema() -> dict:
    text = resources.files("genmetric").joinpath("schema/runreport.schema.json")
    return json.loads(text.read_text(encoding="utf-8"))


def validate_report(doc: dict) -> None:
    """Raise ValidationError if a parsed report violates the bundled schema."""
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"report does not match schema: {exc.message}") from exc
