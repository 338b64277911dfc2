"""Dataset-level evaluation pipelines.

Ties together scorepack streams, annotations, and the metric engines, and
produces plain-dict results ready for report serialization. Every image in
the manifest must be scored and annotated; nothing is silently skipped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import boxes as boxmod
from . import maskmetrics as maskmod
from ._parallel import map_consume
from .boxes import Box, BoxAccCurve, DEFAULT_DELTAS
from .dataset_io import SplitManifest, read_scorepack
from .errors import (
    AnnotationError,
    EmptyGroundTruth,
    NoForegroundPixels,
    NoPixels,
    ScoreMapError,
)
from .maskmetrics import FOREGROUND, IGNORE, PrCurve, TernaryMask
from .scoremap import (
    ScoreMap,
    center_gaussian,
    normalize_max,
    normalize_minmax,
    resize_bilinear,
)

NORMALIZATIONS = ("minmax", "max", "none")
ORDERS = ("normalize-resize", "resize-normalize")


@dataclass
class EvalConfig:
    """Everything that determines a metric run's numbers."""

    task: str = "boxes"
    normalization: str = "minmax"
    tau_mode: str = "grid"  # "grid" or "exact"
    n_taus: int = 1000
    deltas: Tuple[float, ...] = DEFAULT_DELTAS
    order: str = "normalize-resize"
    pxacc_tau: float = 0.5
    per_image_ap: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.task not in ("boxes", "masks"):
            raise ValueError(f"task must be 'boxes' or 'masks', got {self.task!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.tau_mode not in ("grid", "exact"):
            raise ValueError(f"tau mode must be 'grid' or 'exact', got {self.tau_mode!r}")
        if self.n_taus < 1:
            raise ValueError(f"tau grid size must be >= 1, got {self.n_taus}")
        if not self.deltas:
            raise ValueError("at least one delta is required")
        for d in self.deltas:
            if not 0.0 < d <= 1.0:
                raise ValueError(f"deltas must lie in (0, 1], got {d}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")
        if not 0.0 <= self.pxacc_tau <= 1.0:
            raise ValueError(f"pxacc tau must lie in [0, 1], got {self.pxacc_tau}")

    def grid(self) -> np.ndarray:
        return np.arange(self.n_taus, dtype=np.float64) / self.n_taus

    def config_echo(self) -> dict:
        taus: dict = {"mode": self.tau_mode}
        if self.tau_mode == "grid":
            taus["count"] = self.n_taus
        echo = {
            "normalization": self.normalization,
            "taus": taus,
            "order": self.order,
        }
        if self.task == "boxes":
            echo["deltas"] = [float(d) for d in self.deltas]
        else:
            echo["pxacc_tau"] = float(self.pxacc_tau)
            echo["per_image_ap"] = bool(self.per_image_ap)
        return echo


def _normalize(smap: ScoreMap, how: str) -> ScoreMap:
    if how == "minmax":
        return normalize_minmax(smap)
    if how == "max":
        return normalize_max(smap)
    lo, hi = float(smap.values.min()), float(smap.values.max())
    if lo < 0.0 or hi > 1.0:
        raise ScoreMapError(
            f"{smap.image_id}: values span [{lo}, {hi}]; normalization 'none' "
            "requires scores already in [0, 1]"
        )
    return ScoreMap(smap.image_id, smap.values, normalized=True, degenerate=smap.degenerate)


def prepare_map(smap: ScoreMap, target_hw: Tuple[int, int], cfg: EvalConfig) -> ScoreMap:
    """Bring a raw map onto the ground-truth grid in the configured order."""
    if cfg.order == "normalize-resize":
        out = _normalize(smap, cfg.normalization)
        return resize_bilinear(out, *target_hw)
    out = resize_bilinear(smap, *target_hw)
    return _normalize(out, cfg.normalization)


def _prepared_stream(
    maps: Iterable[ScoreMap],
    manifest: SplitManifest,
    cfg: EvalConfig,
    seen: List[str],
) -> Iterator[ScoreMap]:
    for smap in maps:
        entry = manifest.get(smap.image_id)
        seen.append(smap.image_id)
        yield prepare_map(smap, (entry.height, entry.width), cfg)


def _check_coverage(seen: Sequence[str], manifest: SplitManifest, what: str) -> None:
    missing = sorted(manifest.image_ids() - set(seen))
    if missing:
        sample = ", ".join(missing[:5])
        raise AnnotationError(
            f"{len(missing)} manifest image(s) have no {what}: {sample}"
        )


@dataclass
class BoxEvalResult:
    curve: BoxAccCurve
    score: float
    per_delta_best: Dict[float, Tuple[float, float]]
    v1_score: float
    n_images: int
    n_degenerate: int

    def results_dict(self) -> dict:
        per_delta = {
            f"{delta:g}": {"best_tau": tau, "best_acc": acc}
            for delta, (tau, acc) in sorted(self.per_delta_best.items())
        }
        return {
            "primary": self.score,
            "max_box_acc_v2": self.score,
            "max_box_acc_v1": self.v1_score,
            "per_delta": per_delta,
        }

    def counts_dict(self) -> dict:
        return {"n_images": self.n_images, "degenerate_maps": self.n_degenerate}


def _exact_tau_grid(
    open_maps: Callable[[], Iterable[ScoreMap]],
    manifest: SplitManifest,
    cfg: EvalConfig,
) -> np.ndarray:
    """Union of distinct prepared score values across the stream.

    With thresholds at every observed value, max-over-tau equals the
    supremum over all real thresholds, and any shared strictly increasing
    transform of the scores leaves every indicator count unchanged.
    """
    distinct: set = set()
    seen: List[str] = []
    for prepared in _prepared_stream(open_maps(), manifest, cfg, seen):
        if prepared.degenerate:
            continue
        distinct.update(np.unique(prepared.values).tolist())
    if not distinct:
        return np.array([0.0])
    return np.array(sorted(distinct), dtype=np.float64)


def evaluate_boxes(
    open_maps: Callable[[], Iterable[ScoreMap]],
    gt_boxes: Dict[str, List[Box]],
    manifest: SplitManifest,
    cfg: EvalConfig,
) -> BoxEvalResult:
    """Full box-metric evaluation of a scorepack against annotations.

    ``open_maps`` is a zero-argument callable returning a fresh map stream;
    exact-sweep mode consumes it twice (once to collect the threshold set).
    """
    if cfg.tau_mode == "grid":
        taus = cfg.grid()
    else:
        taus = _exact_tau_grid(open_maps, manifest, cfg)

    seen: List[str] = []

    def pairs() -> Iterator[Tuple[ScoreMap, List[Box]]]:
        for prepared in _prepared_stream(open_maps(), manifest, cfg, seen):
            gt = gt_boxes.get(prepared.image_id)
            if not gt:
                raise EmptyGroundTruth(
                    f"{prepared.image_id}: no ground-truth boxes"
                )
            yield prepared, gt

    counts, counts_v1, n_images, n_degenerate = boxmod._sweep_counts(
        pairs(), taus, cfg.deltas, 0.5, cfg.jobs
    )
    _check_coverage(seen, manifest, "scorepack record")

    denom = max(n_images, 1)
    curve = BoxAccCurve(
        taus=taus,
        per_delta={float(d): counts[i] / denom for i, d in enumerate(cfg.deltas)},
        n_images=n_images,
    )
    score, per_delta_best = boxmod.max_box_acc_v2(curve)
    v1 = float(counts_v1.max() / denom) if n_images else 0.0
    return BoxEvalResult(
        curve=curve,
        score=score,
        per_delta_best=per_delta_best,
        v1_score=v1,
        n_images=n_images,
        n_degenerate=n_degenerate,
    )


@dataclass
class MaskEvalResult:
    per_category_ap: Dict[str, float]
    mean_ap: float
    px_acc: float
    pxacc_tau: float
    overall_curve: PrCurve
    per_category_image_ap: Optional[Dict[str, float]]
    n_images: int
    n_degenerate: int

    def results_dict(self) -> dict:
        results = {
            "primary": self.mean_ap,
            "m_px_ap": self.mean_ap,
            "per_category": {
                cat: {"px_ap": ap} for cat, ap in sorted(self.per_category_ap.items())
            },
            "px_acc": {"tau": self.pxacc_tau, "value": self.px_acc},
        }
        if self.per_category_image_ap is not None:
            results["per_image_ap"] = {
                cat: {"mean_px_ap": ap}
                for cat, ap in sorted(self.per_category_image_ap.items())
            }
        return results

    def counts_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "degenerate_maps": self.n_degenerate,
            "n_foreground_pixels": self.overall_curve.n_foreground,
            "n_background_pixels": self.overall_curve.n_background,
            "n_ignore_pixels": self.overall_curve.n_ignore,
        }


def evaluate_masks(
    open_maps: Callable[[], Iterable[ScoreMap]],
    gt_masks: Dict[str, TernaryMask],
    manifest: SplitManifest,
    cfg: EvalConfig,
) -> MaskEvalResult:
    """Full pixel-metric evaluation in one streaming pass: per-category
    pooled average precision, their mean, and pooled pixel accuracy at the
    configured tau."""
    categories = sorted(manifest.categories())
    grid = cfg.grid() if cfg.tau_mode == "grid" else None
    n_levels = len(grid) if grid is not None else 0

    cat_pred = {c: np.zeros(n_levels + 1, dtype=np.int64) for c in categories}
    cat_tp = {c: np.zeros(n_levels + 1, dtype=np.int64) for c in categories}
    cat_scores: Dict[str, List[np.ndarray]] = {c: [] for c in categories}
    cat_fg: Dict[str, List[np.ndarray]] = {c: [] for c in categories}
    cat_pixels = {c: np.zeros(3, dtype=np.int64) for c in categories}  # fg, bg, ignore
    acc_counts = np.zeros(2, dtype=np.int64)  # correct, valid
    image_aps: Dict[str, List[float]] = {c: [] for c in categories}
    seen: List[str] = []
    n_degenerate = 0

    def work(smap: ScoreMap):
        entry = manifest.get(smap.image_id)
        prepared = prepare_map(smap, (entry.height, entry.width), cfg)
        mask = gt_masks.get(smap.image_id)
        if mask is None:
            raise AnnotationError(f"{smap.image_id}: no ground-truth mask")
        if prepared.values.shape != mask.labels.shape:
            raise ScoreMapError(
                f"{smap.image_id}: score map {prepared.values.shape} does not "
                f"match mask {mask.labels.shape}"
            )
        labels = mask.labels.ravel()
        scores = prepared.values.ravel()
        valid = labels != IGNORE
        s_valid = scores[valid]
        f_valid = labels[valid] == FOREGROUND
        n_fg = int(f_valid.sum())
        n_valid = int(valid.sum())
        pixel_counts = (n_fg, n_valid - n_fg, int(labels.size - n_valid))
        n_correct = int(((s_valid >= cfg.pxacc_tau) == f_valid).sum())

        if grid is not None:
            lev_valid = np.searchsorted(grid, s_valid, side="right")
            lev_fg = np.searchsorted(grid, s_valid[f_valid], side="right")
            payload = (
                np.bincount(lev_valid, minlength=n_levels + 1).astype(np.int64),
                np.bincount(lev_fg, minlength=n_levels + 1).astype(np.int64),
            )
        else:
            payload = (s_valid.copy(), f_valid.copy())

        image_ap = None
        if cfg.per_image_ap:
            if n_fg == 0:
                raise NoForegroundPixels(
                    f"{smap.image_id}: per-image average precision needs "
                    "foreground pixels in every image"
                )
            if grid is not None:
                one = maskmod.curve_from_histograms(
                    grid, payload[0], payload[1], *pixel_counts
                )
            else:
                one = maskmod.curve_from_pool(s_valid, f_valid, pixel_counts[2])
            image_ap = maskmod.px_ap(one)

        return (
            smap.image_id,
            entry.category_id,
            prepared.degenerate,
            payload,
            pixel_counts,
            n_correct,
            n_valid,
            image_ap,
        )

    def consume(result):
        nonlocal n_degenerate
        image_id, category, degenerate, payload, pixel_counts, n_correct, n_valid, image_ap = result
        seen.append(image_id)
        if degenerate:
            n_degenerate += 1
        if grid is not None:
            cat_pred[category] += payload[0]
            cat_tp[category] += payload[1]
        else:
            cat_scores[category].append(payload[0])
            cat_fg[category].append(payload[1])
        cat_pixels[category] += np.asarray(pixel_counts, dtype=np.int64)
        acc_counts[0] += n_correct
        acc_counts[1] += n_valid
        if image_ap is not None:
            image_aps[category].append(image_ap)

    map_consume(open_maps(), work, consume, cfg.jobs)
    _check_coverage(seen, manifest, "scorepack record")

    per_category_ap: Dict[str, float] = {}
    for c in categories:
        n_fg, n_bg, n_ignore = (int(v) for v in cat_pixels[c])
        try:
            if grid is not None:
                curve = maskmod.curve_from_histograms(
                    grid, cat_pred[c], cat_tp[c], n_fg, n_bg, n_ignore
                )
            else:
                curve = maskmod.curve_from_pool(
                    np.concatenate(cat_scores[c]) if cat_scores[c] else np.empty(0),
                    np.concatenate(cat_fg[c]) if cat_fg[c] else np.empty(0, dtype=bool),
                    n_ignore,
                )
        except NoForegroundPixels:
            raise NoForegroundPixels(
                f"category {c!r} has no foreground pixels"
            ) from None
        per_category_ap[c] = maskmod.px_ap(curve)

    mean_ap = maskmod.m_px_ap(per_category_ap)

    totals = np.zeros(3, dtype=np.int64)
    for c in categories:
        totals += cat_pixels[c]
    if grid is not None:
        overall = maskmod.curve_from_histograms(
            grid,
            sum(cat_pred.values()),
            sum(cat_tp.values()),
            int(totals[0]),
            int(totals[1]),
            int(totals[2]),
        )
    else:
        overall = maskmod.curve_from_pool(
            np.concatenate([a for c in categories for a in cat_scores[c]]),
            np.concatenate([a for c in categories for a in cat_fg[c]]),
            int(totals[2]),
        )

    if int(acc_counts[1]) == 0:
        raise NoPixels("every pixel in the stream is ignored")
    acc = float(acc_counts[0] / acc_counts[1])

    per_category_image_ap: Optional[Dict[str, float]] = None
    if cfg.per_image_ap:
        per_category_image_ap = {
            c: (float(np.mean(image_aps[c])) if image_aps[c] else 0.0)
            for c in categories
        }

    return MaskEvalResult(
        per_category_ap=per_category_ap,
        mean_ap=mean_ap,
        px_acc=acc,
        pxacc_tau=cfg.pxacc_tau,
        overall_curve=overall,
        per_category_image_ap=per_category_image_ap,
        n_images=len(seen),
        n_degenerate=n_degenerate,
    )


def center_baseline_maps(manifest: SplitManifest, sigma: float = 1.0) -> Iterator[ScoreMap]:
    """One centered isotropic Gaussian map per manifest entry, at image size."""
    for e in manifest.entries:
        yield center_gaussian(e.height, e.width, sigma=sigma, image_id=e.image_id)


def pack_stream_factory(path) -> Callable[[], Iterator[ScoreMap]]:
    return lambda: read_scorepack(path)
