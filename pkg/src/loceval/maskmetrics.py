"""Mask-based pixel metrics with ignore-region support.

Pixels are pooled across all images in the evaluated stream (not averaged
per image); ignore-labeled pixels are excluded from every count. Precision
over an empty prediction set is defined as 1.0, so precision-recall curves
start at (recall 0, precision 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from ._parallel import map_consume
from .errors import (
    EmptyCategorySet,
    NoForegroundPixels,
    NoPixels,
    ScoreMapError,
)
from .scoremap import ScoreMap

BACKGROUND = 0
FOREGROUND = 1
IGNORE = 2


@dataclass
class TernaryMask:
    """Per-pixel ground truth: 0 background, 1 foreground, 2 ignore."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2 or lab.size == 0:
            raise ValueError(f"mask must be a non-empty 2-D array, got {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValueError(f"mask labels must be integers, got dtype {lab.dtype}")
        if lab.min() < BACKGROUND or lab.max() > IGNORE:
            raise ValueError("mask labels must be 0 (bg), 1 (fg), or 2 (ignore)")
        self.labels = lab.astype(np.uint8)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class PrCurve:
    """Pooled pixel precision/recall per threshold, plus pixel counts."""

    taus: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    n_foreground: int
    n_background: int
    n_ignore: int

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=np.float64)
        self.precision = np.asarray(self.precision, dtype=np.float64)
        self.recall = np.asarray(self.recall, dtype=np.float64)
        if not (len(self.taus) == len(self.precision) == len(self.recall)):
            raise ValueError("taus, precision, recall must have equal length")


def _check_pair(smap: ScoreMap, mask: TernaryMask) -> None:
    if not smap.normalized:
        raise ScoreMapError(f"{smap.image_id}: pixel metrics require a normalized map")
    if smap.values.shape != mask.labels.shape:
        raise ScoreMapError(
            f"{smap.image_id}: score map {smap.values.shape} does not match "
            f"mask {mask.labels.shape}"
        )


def _image_level_counts(
    item: Tuple[ScoreMap, TernaryMask], taus: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, int, int, int]:
    """Histogram of quantized score levels over valid pixels and over
    foreground pixels; level -1 collects scores below every tau."""
    smap, mask = item
    _check_pair(smap, mask)
    labels = mask.labels.ravel()
    scores = smap.values.ravel()
    valid = labels != IGNORE
    fg = labels == FOREGROUND
    n_levels = len(taus)
    lev_valid = np.searchsorted(taus, scores[valid], side="right")
    lev_fg = np.searchsorted(taus, scores[fg], side="right")
    pred_hist = np.bincount(lev_valid, minlength=n_levels + 1).astype(np.int64)
    tp_hist = np.bincount(lev_fg, minlength=n_levels + 1).astype(np.int64)
    n_fg = int(fg.sum())
    n_ignore = int(labels.size - valid.sum())
    n_bg = int(labels.size - n_fg - n_ignore)
    return pred_hist, tp_hist, n_fg, n_bg, n_ignore


def curve_from_histograms(
    taus: np.ndarray,
    pred_hist: np.ndarray,
    tp_hist: np.ndarray,
    n_fg: int,
    n_bg: int,
    n_ignore: int,
) -> PrCurve:
    """Assemble a PrCurve from pooled level histograms.

    Histogram slot j counts pixels with score in [taus[j-1], taus[j]); such
    a pixel is predicted at threshold k exactly when j > k, so suffix sums
    give the prediction and true-positive counts per threshold.
    """
    if n_fg == 0:
        raise NoForegroundPixels("no foreground pixels pooled across the stream")
    pred_at = np.cumsum(pred_hist[::-1])[::-1][1:]
    tp_at = np.cumsum(tp_hist[::-1])[::-1][1:]
    precision = np.where(pred_at > 0, tp_at / np.maximum(pred_at, 1), 1.0)
    recall = tp_at / n_fg
    return PrCurve(
        taus=taus,
        precision=precision,
        recall=recall,
        n_foreground=n_fg,
        n_background=n_bg,
        n_ignore=n_ignore,
    )


def curve_from_pool(
    scores: np.ndarray,
    fg: np.ndarray,
    n_ignore: int,
) -> PrCurve:
    """Exact precision/recall over every distinct value of a pooled score
    vector (non-ignore pixels only; ``fg`` flags the foreground ones)."""
    n_fg = int(fg.sum())
    if n_fg == 0:
        raise NoForegroundPixels("no foreground pixels pooled across the stream")
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    tp_cum = np.cumsum(fg[order].astype(np.int64))
    # The last index of each run of equal scores carries that threshold's
    # full prediction set.
    last = np.nonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))[0]
    pred_at = last + 1
    tp_at = tp_cum[last]
    precision = tp_at / pred_at
    recall = tp_at / n_fg
    # Flip to ascending tau to match PrCurve's convention.
    return PrCurve(
        taus=s_sorted[last][::-1].copy(),
        precision=precision[::-1].copy(),
        recall=recall[::-1].copy(),
        n_foreground=n_fg,
        n_background=int(len(scores) - n_fg),
        n_ignore=n_ignore,
    )


def pr_curve(
    pairs: Iterable[Tuple[ScoreMap, TernaryMask]],
    taus: np.ndarray,
    jobs: int = 1,
) -> PrCurve:
    """Pooled precision/recall at each tau over a stream of image pairs.

    precision(tau) = |{s >= tau} and fg| / |{s >= tau}| (1.0 if no pixel
    predicted), recall(tau) = |{s >= tau} and fg| / |fg|, both over the
    union of all non-ignore pixels in the stream.
    """
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or len(taus) == 0:
        raise ValueError("tau grid must be a non-empty 1-D sequence")
    n_levels = len(taus)
    pred_hist = np.zeros(n_levels + 1, dtype=np.int64)
    tp_hist = np.zeros(n_levels + 1, dtype=np.int64)
    totals = np.zeros(3, dtype=np.int64)

    def consume(result):
        ph, th, n_fg, n_bg, n_ignore = result
        pred_hist[: len(ph)] += ph
        tp_hist[: len(th)] += th
        totals[0] += n_fg
        totals[1] += n_bg
        totals[2] += n_ignore

    map_consume(pairs, lambda item: _image_level_counts(item, taus), consume, jobs)
    return curve_from_histograms(
        taus, pred_hist, tp_hist, int(totals[0]), int(totals[1]), int(totals[2])
    )


def pr_curve_exact(
    pairs: Iterable[Tuple[ScoreMap, TernaryMask]],
    jobs: int = 1,
) -> PrCurve:
    """Precision/recall swept over every distinct pooled score value.

    Equivalent to pr_curve with the finest possible grid; used for exact
    average precision and for invariance testing.
    """
    scores_parts = []
    fg_parts = []
    totals = np.zeros(3, dtype=np.int64)

    def work(item):
        smap, mask = item
        _check_pair(smap, mask)
        labels = mask.labels.ravel()
        scores = smap.values.ravel()
        valid = labels != IGNORE
        return scores[valid], labels[valid] == FOREGROUND, int(labels.size - valid.sum())

    def consume(result):
        s, f, n_ignore = result
        scores_parts.append(s)
        fg_parts.append(f)
        totals[0] += int(f.sum())
        totals[1] += int(len(f) - f.sum())
        totals[2] += n_ignore

    map_consume(pairs, work, consume, jobs)

    if int(totals[0]) == 0:
        raise NoForegroundPixels("no foreground pixels pooled across the stream")
    scores = np.concatenate(scores_parts)
    fg = np.concatenate(fg_parts)
    return curve_from_pool(scores, fg, int(totals[2]))


def px_ap(curve: PrCurve) -> float:
    """Area under the precision-recall curve by the rectangle rule.

    Thresholds are visited in descending tau order (recall non-decreasing),
    with recall before the first term taken as 0.
    """
    ap = 0.0
    prev_recall = 0.0
    for p, r in zip(curve.precision[::-1], curve.recall[::-1]):
        ap += p * (r - prev_recall)
        prev_recall = r
    return float(ap)


def m_px_ap(per_category: Mapping[str, float]) -> float:
    """Unweighted mean of per-category average precisions."""
    if not per_category:
        raise EmptyCategorySet("no categories to average")
    return float(sum(per_category.values()) / len(per_category))


def px_acc(
    pairs: Iterable[Tuple[ScoreMap, TernaryMask]],
    tau: float,
    jobs: int = 1,
) -> float:
    """Pooled fraction of non-ignore pixels classified correctly at tau:
    foreground pixels scoring >= tau plus background pixels scoring < tau."""
    counts = np.zeros(2, dtype=np.int64)  # correct, valid

    def work(item):
        smap, mask = item
        _check_pair(smap, mask)
        labels = mask.labels.ravel()
        scores = smap.values.ravel()
        valid = labels != IGNORE
        pred_fg = scores[valid] >= tau
        actual_fg = labels[valid] == FOREGROUND
        return int((pred_fg == actual_fg).sum()), int(valid.sum())

    def consume(result):
        counts[0] += result[0]
        counts[1] += result[1]

    map_consume(pairs, work, consume, jobs)
    if counts[1] == 0:
        raise NoPixels("every pixel in the stream is ignored")
    return float(counts[0] / counts[1])
