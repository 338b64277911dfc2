"""HTTP wrapper around the evaluation engine.

Paths in requests refer to files on the server's filesystem; the service is
meant for co-located tooling (dashboards, CI) rather than remote upload.
Domain errors map to HTTP 400 with a ``kind`` mirroring the CLI exit codes
(``io`` or ``validation``).
"""
from __future__ import annotations

from typing import List, Literal, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .dataset_io import (
    read_boxes,
    read_manifest,
    read_masks,
    validate_splits,
    write_scorepack,
)
from .engine import (
    EvalConfig,
    center_baseline_maps,
    evaluate_boxes,
    evaluate_masks,
    pack_stream_factory,
)
from .errors import LocevalError, MissingScorepack, PackError
from .report import metric_report


class EvaluateRequest(BaseModel):
    task: Literal["boxes", "masks"]
    scoremaps: str
    gt: str
    manifest: str
    norm: Literal["minmax", "max", "none"] = "minmax"
    taus: str = "1000"
    deltas: List[float] = Field(default=[0.3, 0.5, 0.7])
    order: Literal["normalize-resize", "resize-normalize"] = "normalize-resize"
    pxacc_tau: float = 0.5
    per_image_ap: bool = False
    jobs: int = 1


class BaselineRequest(BaseModel):
    manifest: str
    sigma: float = 1.0
    out: str


class ValidateRequest(BaseModel):
    train_weaksup: str
    train_fullsup: str
    test_fullsup: str


def _config_from(req: EvaluateRequest) -> EvalConfig:
    if req.taus == "exact":
        mode, count = "exact", 1000
    else:
        mode, count = "grid", int(req.taus)
    return EvalConfig(
        task=req.task,
        normalization=req.norm,
        tau_mode=mode,
        n_taus=count,
        deltas=tuple(req.deltas),
        order=req.order,
        pxacc_tau=req.pxacc_tau,
        per_image_ap=req.per_image_ap,
        jobs=req.jobs,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="loceval", version=__version__)

    @app.exception_handler(LocevalError)
    async def _domain_error(request, exc: LocevalError):
        kind = "io" if isinstance(exc, (PackError, MissingScorepack)) else "validation"
        return JSONResponse(
            status_code=400,
            content={"kind": kind, "message": str(exc)},
        )

    @app.exception_handler(OSError)
    async def _os_error(request, exc: OSError):
        return JSONResponse(
            status_code=400, content={"kind": "io", "message": str(exc)}
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/evaluate")
    def evaluate(req: EvaluateRequest):
        cfg = _config_from(req)
        manifest = read_manifest(req.manifest)
        maps = pack_stream_factory(req.scoremaps)
        if req.task == "boxes":
            gt = read_boxes(req.gt, manifest)
            result = evaluate_boxes(maps, gt, manifest, cfg)
        else:
            gt = read_masks(req.gt, manifest)
            result = evaluate_masks(maps, gt, manifest, cfg)
        return metric_report(cfg, result)

    @app.post("/baseline")
    def baseline(req: BaselineRequest):
        manifest = read_manifest(req.manifest)
        count = write_scorepack(
            center_baseline_maps(manifest, sigma=req.sigma), req.out
        )
        return {"records": count, "path": req.out}

    @app.post("/validate-splits")
    def validate(req: ValidateRequest):
        weak = read_manifest(req.train_weaksup, "train-weaksup")
        full = read_manifest(req.train_fullsup, "train-fullsup")
        test = read_manifest(req.test_fullsup, "test-fullsup")
        return validate_splits(weak, full, test).to_dict()

    return app
