"""Parsed evaluation reports.

ClientReport holds the same fields the evaluator writes to its JSON report
files, as plain Python values. Parsing is strict: an unknown top-level key
or a schema version bump raises instead of silently dropping data, which
keeps the round-trip guarantee honest — ``from_file(p).to_json_bytes()``
reproduces the file exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ReportParseError

SCHEMA_VERSION = 1

_REQUIRED = ("schema_version", "toolkit_version", "task", "config", "results", "counts")
_OPTIONAL = ("provenance",)


@dataclass(frozen=True)
class ClientReport:
    schema_version: int
    toolkit_version: str
    task: str
    config: dict
    results: dict
    counts: dict
    provenance: Optional[dict] = None

    @property
    def primary(self) -> float:
        """The report's headline score for its task."""
        return float(self.results["primary"])

    @classmethod
    def from_dict(cls, data: dict) -> "ClientReport":
        if not isinstance(data, dict):
            raise ReportParseError(f"report must be a JSON object, got {type(data).__name__}")
        missing = [k for k in _REQUIRED if k not in data]
        if missing:
            raise ReportParseError(f"report is missing fields: {', '.join(missing)}")
        unknown = [k for k in data if k not in _REQUIRED + _OPTIONAL]
        if unknown:
            raise ReportParseError(f"report has unrecognized fields: {', '.join(unknown)}")
        if data["schema_version"] != SCHEMA_VERSION:
            raise ReportParseError(
                f"unsupported schema_version {data['schema_version']!r}; "
                f"this client understands {SCHEMA_VERSION}"
            )
        return cls(
            schema_version=data["schema_version"],
            toolkit_version=data["toolkit_version"],
            task=data["task"],
            config=data["config"],
            results=data["results"],
            counts=data["counts"],
            provenance=data.get("provenance"),
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ClientReport":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ReportParseError(f"report is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path) -> "ClientReport":
        return cls.from_bytes(Path(path).read_bytes())

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "toolkit_version": self.toolkit_version,
            "task": self.task,
            "config": self.config,
            "results": self.results,
            "counts": self.counts,
        }
        if self.provenance is not None:
            out["provenance"] = self.provenance
        return out

    def to_json_bytes(self) -> bytes:
        """Serialize in the evaluator's canonical form (sorted keys,
        two-space indent, trailing newline)."""
        return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_json_bytes())
