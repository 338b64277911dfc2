"""Subprocess wrapper around the evaluator CLI.

The client never computes a metric itself; evaluation always goes through
the installed ``loceval`` binary so scores are bit-identical to what the
toolkit reports everywhere else. The binary is found, in order, from the
``binary`` option, the LOCEVAL_CLI environment variable, or PATH.
"""
from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import BinaryNotFound, EvaluationFailed
from .reports import ClientReport

BINARY_ENV = "LOCEVAL_CLI"
DEFAULT_BINARY = "loceval"

TASKS = ("boxes", "masks")


@dataclass
class EvaluateOptions:
    """Knobs forwarded to the CLI; ``None`` means use the CLI's default.

    ``manifest`` is required — the evaluator needs the image-size listing
    to pair score maps with annotations. If ``out`` is set the report file
    is written there and kept; otherwise it goes to a temporary directory
    and only the parsed ClientReport survives.
    """

    manifest: Union[str, Path]
    out: Optional[Union[str, Path]] = None
    norm: Optional[str] = None
    taus: Union[int, str, None] = None
    deltas: Optional[Sequence[float]] = None
    order: Optional[str] = None
    pxacc_tau: Optional[float] = None
    jobs: Optional[int] = None
    per_image_ap: bool = False
    stamp: bool = False
    binary: Optional[Union[str, Path]] = None


def resolve_binary(explicit: Union[str, Path, None] = None) -> str:
    candidate = str(explicit) if explicit else os.environ.get(BINARY_ENV) or DEFAULT_BINARY
    found = shutil.which(candidate)
    if found is None:
        raise BinaryNotFound(
            f"evaluator binary {candidate!r} not found; install the toolkit, "
            f"set {BINARY_ENV}, or pass an explicit path"
        )
    return found


def _cli_args(scorepack, gt, task: str, options: EvaluateOptions, out_path: Path) -> list:
    argv = [
        "evaluate",
        "--task", task,
        "--scoremaps", str(scorepack),
        "--gt", str(gt),
        "--manifest", str(options.manifest),
        "--out", str(out_path),
    ]
    if options.norm is not None:
        argv += ["--norm", options.norm]
    if options.taus is not None:
        argv += ["--taus", str(options.taus)]
    if options.deltas is not None:
        argv += ["--deltas", ",".join(f"{d:g}" for d in options.deltas)]
    if options.order is not None:
        argv += ["--order", options.order]
    if options.pxacc_tau is not None:
        argv += ["--pxacc-tau", str(options.pxacc_tau)]
    if options.jobs is not None:
        argv += ["--jobs", str(options.jobs)]
    if options.per_image_ap:
        argv.append("--per-image-ap")
    if options.stamp:
        argv.append("--stamp")
    return argv


def evaluate(scorepack, gt, task: str, options: EvaluateOptions) -> ClientReport:
    """Score ``scorepack`` against ``gt`` by spawning the evaluator CLI.

    ``gt`` is a box annotation file for the "boxes" task or a mask root
    directory for "masks". Raises BinaryNotFound if no CLI is reachable and
    EvaluationFailed (with the exit code and captured output) if it exits
    nonzero.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    binary = resolve_binary(options.binary)

    def run(out_path: Path) -> ClientReport:
        argv = [binary] + _cli_args(scorepack, gt, task, options, out_path)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except FileNotFoundError as exc:
            raise BinaryNotFound(f"evaluator binary vanished: {exc}") from exc
        if proc.returncode != 0:
            streams = (proc.stderr.strip(), proc.stdout.strip())
            raise EvaluationFailed(proc.returncode, "\n".join(s for s in streams if s))
        return ClientReport.from_file(out_path)

    if options.out is not None:
        return run(Path(options.out))
    with tempfile.TemporaryDirectory(prefix="loceval-client-") as tmp:
        return run(Path(tmp) / "report.json")
