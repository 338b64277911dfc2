"""Training-pipeline client for the loceval evaluation toolkit.

Three jobs, nothing more: export in-memory score maps to the scorepack
container, invoke the installed ``loceval`` CLI on them, and parse the
resulting report files. All communication with the toolkit happens through
files and subprocesses, never imports, so the client stays dependency-light
and the numbers it hands back are the toolkit's own.
"""
from .errors import (
    BinaryNotFound,
    ClientError,
    EvaluationFailed,
    PackWriteError,
    ReportParseError,
)
from .pack import PACK_MAGIC, PACK_VERSION, write_scorepack
from .reports import ClientReport
from .run import BINARY_ENV, DEFAULT_BINARY, EvaluateOptions, evaluate, resolve_binary

__version__ = "0.1.0"

__all__ = [
    "BINARY_ENV",
    "BinaryNotFound",
    "ClientError",
    "ClientReport",
    "DEFAULT_BINARY",
    "EvaluateOptions",
    "EvaluationFailed",
    "PACK_MAGIC",
    "PACK_VERSION",
    "PackWriteError",
    "ReportParseError",
    "evaluate",
    "resolve_binary",
    "write_scorepack",
]
