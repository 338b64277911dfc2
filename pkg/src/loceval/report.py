"""Report assembly and deterministic JSON serialization.

Reports are plain dicts serialized with sorted keys and a fixed layout, so
identical inputs and flags always produce byte-identical files. They carry
no timestamps or input paths unless a provenance block is explicitly
requested. Schemas for both report kinds ship with the package under
``loceval/schemas`` and are validated in the test suite.
"""
from __future__ import annotations

import json
from importlib import resources
from typing import Optional

from . import __version__
from .engine import BoxEvalResult, EvalConfig, MaskEvalResult

SCHEMA_VERSION = 1


def metric_report(
    cfg: EvalConfig,
    result,
    provenance: Optional[dict] = None,
) -> dict:
    """Assemble a metric report for a box or mask evaluation result."""
    if isinstance(result, BoxEvalResult):
        task = "boxes"
    elif isinstance(result, MaskEvalResult):
        task = "masks"
    else:
        raise TypeError(f"unsupported result type {type(result).__name__}")
    report = {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "task": task,
        "config": cfg.config_echo(),
        "results": result.results_dict(),
        "counts": result.counts_dict(),
    }
    if provenance is not None:
        report["provenance"] = provenance
    return report


def search_report(
    config: dict,
    trials: list,
    selected_trial_id: Optional[int],
    test_score: Optional[float],
    counts: dict,
    provenance: Optional[dict] = None,
) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "task": "search",
        "config": config,
        "trials": trials,
        "selected_trial_id": selected_trial_id,
        "test_score": test_score,
        "counts": counts,
    }
    if provenance is not None:
        report["provenance"] = provenance
    return report


def to_json_bytes(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("utf-8")


def write_report(report: dict, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_json_bytes(report))


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_schema(name: str) -> dict:
    """Load a shipped JSON schema: 'metric_report' or 'search_report'."""
    text = (
        resources.files("loceval")
        .joinpath("schemas", f"{name}.schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)
