"""Box-based localization metrics.

Boxes use the half-open integer convention [x0, x1) x [y0, y1): a box's area
is (x1 - x0) * (y1 - y0) pixels and a one-pixel box at column 3, row 2 is
(3, 2, 4, 3). Connected components use 8-connectivity.

The headline score averages, over IoU thresholds delta in {0.3, 0.5, 0.7},
the best box accuracy achievable at any score threshold tau; the legacy
variant compares only the largest connected component at delta 0.5.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ._parallel import map_consume
from ._sweep import sweep_image
from .errors import EmptyGroundTruth, ScoreMapError
from .scoremap import ScoreMap

DEFAULT_DELTAS = (0.3, 0.5, 0.7)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=np.int32)


class Box(NamedTuple):
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def validate_box(box: Sequence[int], width: int | None = None, height: int | None = None) -> Box:
    """Check box invariants (positive extent, non-negative, optional bounds)."""
    x0, y0, x1, y1 = (int(c) for c in box)
    if x0 < 0 or y0 < 0 or x1 <= x0 or y1 <= y0:
        raise ValueError(f"invalid box ({x0}, {y0}, {x1}, {y1})")
    if width is not None and x1 > width:
        raise ValueError(f"box ({x0}, {y0}, {x1}, {y1}) exceeds width {width}")
    if height is not None and y1 > height:
        raise ValueError(f"box ({x0}, {y0}, {x1}, {y1}) exceeds height {height}")
    return Box(x0, y0, x1, y1)


def extract_boxes(mask: np.ndarray) -> List[Box]:
    """Tightest axis-aligned box around each 8-connected component.

    Returns one Box per component in first-appearance (row-major) order;
    an all-false mask yields an empty list.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    labeled, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 0:
        return []
    out = []
    for sl in ndimage.find_objects(labeled):
        ys, xs = sl
        out.append(Box(xs.start, ys.start, xs.stop, ys.stop))
    return out


def box_iou(a: Sequence[int], b: Sequence[int]) -> float:
    """Intersection-over-union of two half-open boxes."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    if iw <= 0:
        return 0.0
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def best_iou(estimated: Sequence[Sequence[int]], ground_truth: Sequence[Sequence[int]]) -> float:
    """Best IoU over all (estimated, ground-truth) pairs.

    An empty estimate scores 0.0 (a miss); empty ground truth is an error.
    """
    if not ground_truth:
        raise EmptyGroundTruth("ground-truth box set is empty")
    best = 0.0
    for e in estimated:
        for g in ground_truth:
            v = box_iou(e, g)
            if v > best:
                best = v
    return best


@dataclass
class BoxAccCurve:
    """Box accuracy per (delta, tau): fraction of images whose best
    component-box IoU against ground truth reaches delta at threshold tau."""

    taus: np.ndarray
    per_delta: Dict[float, np.ndarray]
    n_images: int

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=np.float64)
        for delta, accs in self.per_delta.items():
            accs = np.asarray(accs, dtype=np.float64)
            if accs.shape != self.taus.shape:
                raise ValueError(
                    f"accuracy sequence for delta={delta} has length "
                    f"{accs.shape}, expected {self.taus.shape}"
                )
            if len(accs) and (accs.min() < 0.0 or accs.max() > 1.0):
                raise ValueError(f"accuracies for delta={delta} leave [0, 1]")
            self.per_delta[delta] = accs


def _check_taus(taus: np.ndarray) -> np.ndarray:
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or len(taus) == 0:
        raise ValueError("tau grid must be a non-empty 1-D sequence")
    if len(taus) > 1 and not np.all(np.diff(taus) > 0):
        raise ValueError("tau grid must be strictly ascending")
    return taus


def _image_ious(item: Tuple[ScoreMap, Sequence[Sequence[int]]], taus: np.ndarray):
    """Per-image kernel invocation; returns (best_all, best_largest) per tau,
    or None for a degenerate map (an automatic miss)."""
    smap, gt = item
    if not gt:
        raise EmptyGroundTruth(f"{smap.image_id}: no ground-truth boxes")
    if smap.degenerate:
        return None
    if not smap.normalized:
        raise ScoreMapError(f"{smap.image_id}: box metrics require a normalized map")
    gt_arr = np.asarray([tuple(b) for b in gt], dtype=np.int64)
    return sweep_image(smap.values, taus, gt_arr)


def _sweep_counts(
    pairs: Iterable[Tuple[ScoreMap, Sequence[Sequence[int]]]],
    taus: np.ndarray,
    deltas: Sequence[float],
    v1_delta: float,
    jobs: int,
):
    """Shared accumulation pass: integer hit counts per (delta, tau) for the
    all-components metric, per tau for the largest-component metric."""
    deltas_arr = np.asarray(deltas, dtype=np.float64)
    counts = np.zeros((len(deltas_arr), len(taus)), dtype=np.int64)
    counts_largest = np.zeros(len(taus), dtype=np.int64)
    n_images = 0
    n_degenerate = 0

    def consume(result):
        nonlocal n_images, n_degenerate
        n_images += 1
        if result is None:
            n_degenerate += 1
            return
        all_iou, largest_iou = result
        counts[:] += all_iou[None, :] >= deltas_arr[:, None]
        counts_largest[:] += largest_iou >= v1_delta

    map_consume(pairs, lambda item: _image_ious(item, taus), consume, jobs)
    return counts, counts_largest, n_images, n_degenerate


def box_acc_sweep(
    pairs: Iterable[Tuple[ScoreMap, Sequence[Sequence[int]]]],
    taus: np.ndarray,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    jobs: int = 1,
) -> BoxAccCurve:
    """Box accuracy over a full (tau, delta) grid in one streaming pass.

    Each pair is (normalized score map at ground-truth resolution, boxes).
    Degenerate maps count as misses at every threshold.
    """
    taus = _check_taus(taus)
    counts, _, n_images, _ = _sweep_counts(pairs, taus, deltas, 0.5, jobs)
    denom = max(n_images, 1)
    per_delta = {
        float(d): counts[i] / denom for i, d in enumerate(deltas)
    }
    return BoxAccCurve(taus=taus, per_delta=per_delta, n_images=n_images)


def max_box_acc_v2(curve: BoxAccCurve) -> Tuple[float, Dict[float, Tuple[float, float]]]:
    """Best accuracy over tau for each delta, averaged across deltas.

    Returns (score, {delta: (best_tau, best_acc)}); tau ties resolve to the
    smallest tau so reports are deterministic.
    """
    if len(curve.taus) == 0 or not curve.per_delta:
        raise ValueError("curve must carry at least one tau and one delta")
    per_delta_best = {}
    total = 0.0
    for delta in sorted(curve.per_delta):
        accs = curve.per_delta[delta]
        k = int(np.argmax(accs))  # first occurrence = smallest tau
        per_delta_best[delta] = (float(curve.taus[k]), float(accs[k]))
        total += float(accs[k])
    return total / len(per_delta_best), per_delta_best


def max_box_acc_v1(
    pairs: Iterable[Tuple[ScoreMap, Sequence[Sequence[int]]]],
    taus: np.ndarray,
    delta: float = 0.5,
    jobs: int = 1,
) -> float:
    """Legacy metric: only the largest-area component's box is compared,
    at a single delta (default 0.5), best over tau.

    Area ties pick the component containing the earliest row-major pixel.
    """
    taus = _check_taus(taus)
    _, counts_largest, n_images, _ = _sweep_counts(pairs, taus, (), delta, jobs)
    if n_images == 0:
        return 0.0
    return float(counts_largest.max() / n_images)
