"""Incremental threshold-sweep kernel for box metrics.

Computing boxed connected components independently at every threshold of a
1000-point grid costs O(pixels * thresholds) per image. This kernel exploits
the nesting of superlevel sets: as tau decreases, pixels only get added, so
components only grow and merge. One union-find pass over pixels sorted by
quantized score level yields, per threshold checkpoint, the best IoU between
any component box and the ground-truth boxes, plus the IoU of the largest
component (for the legacy single-component metric). Total cost is close to
O(pixels * alpha(pixels) + thresholds) per image.

The layout is numba-friendly: flat int32 state arrays indexed by pixel, no
Python objects inside the jitted function.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _sweep_kernel(levels, height, width, n_levels, gt_boxes):
    """Per-checkpoint component/box IoU statistics.

    levels:   int32[height*width]; quantized level per pixel, -1 if the score
              is below every threshold. Pixel p is active at checkpoint k
              iff levels[p] >= k.
    gt_boxes: int64[n_gt, 4] as (x0, y0, x1, y1), half-open.

    Returns (best_all, best_largest), both float64[n_levels]:
      best_all[k]     = max IoU between any component box and any GT box
      best_largest[k] = IoU of the largest-area component's box (area ties
                        resolved to the component containing the earliest
                        pixel in row-major order); 0.0 when no components
    """
    n_pix = height * width

    # Counting sort: pixel indices ordered by level descending, stable in
    # pixel index within a level. Bucket b holds level b-1; bucket 0 (level
    # -1) sorts last and is never consumed.
    bucket_count = np.zeros(n_levels + 1, np.int64)
    for p in range(n_pix):
        bucket_count[levels[p] + 1] += 1
    starts = np.empty(n_levels + 1, np.int64)
    acc = 0
    for b in range(n_levels, -1, -1):
        starts[b] = acc
        acc += bucket_count[b]
    order = np.empty(n_pix, np.int32)
    fill = starts.copy()
    for p in range(n_pix):
        b = levels[p] + 1
        order[fill[b]] = p
        fill[b] += 1

    parent = np.full(n_pix, -1, np.int32)
    bx0 = np.empty(n_pix, np.int32)
    by0 = np.empty(n_pix, np.int32)
    bx1 = np.empty(n_pix, np.int32)
    by1 = np.empty(n_pix, np.int32)
    area = np.empty(n_pix, np.int64)
    first_pix = np.empty(n_pix, np.int32)
    iou_cache = np.zeros(n_pix, np.float64)
    stale = np.zeros(n_pix, np.uint8)
    roots = np.empty(n_pix, np.int32)
    n_roots = 0

    best_all = np.zeros(n_levels, np.float64)
    best_largest = np.zeros(n_levels, np.float64)
    n_gt = gt_boxes.shape[0]

    ptr = 0
    for k in range(n_levels - 1, -1, -1):
        changed = False
        while ptr < n_pix and levels[order[ptr]] >= k:
            p = order[ptr]
            ptr += 1
            changed = True
            y = p // width
            x = p - y * width
            parent[p] = p
            bx0[p] = x
            bx1[p] = x + 1
            by0[p] = y
            by1[p] = y + 1
            area[p] = 1
            first_pix[p] = p
            iou_cache[p] = 0.0
            stale[p] = 1
            roots[n_roots] = p
            n_roots += 1
            # Union with already-active 8-neighbors.
            for dy in range(-1, 2):
                ny = y + dy
                if ny < 0 or ny >= height:
                    continue
                for dx in range(-1, 2):
                    if dy == 0 and dx == 0:
                        continue
                    nx = x + dx
                    if nx < 0 or nx >= width:
                        continue
                    q = ny * width + nx
                    if parent[q] < 0:
                        continue
                    # find roots with path halving
                    ra = p
                    while parent[ra] != ra:
                        parent[ra] = parent[parent[ra]]
                        ra = parent[ra]
                    rb = q
                    while parent[rb] != rb:
                        parent[rb] = parent[parent[rb]]
                        rb = parent[rb]
                    if ra == rb:
                        continue
                    if area[ra] >= area[rb]:
                        win, lose = ra, rb
                    else:
                        win, lose = rb, ra
                    parent[lose] = win
                    area[win] += area[lose]
                    if bx0[lose] < bx0[win]:
                        bx0[win] = bx0[lose]
                    if by0[lose] < by0[win]:
                        by0[win] = by0[lose]
                    if bx1[lose] > bx1[win]:
                        bx1[win] = bx1[lose]
                    if by1[lose] > by1[win]:
                        by1[win] = by1[lose]
                    if first_pix[lose] < first_pix[win]:
                        first_pix[win] = first_pix[lose]
                    stale[win] = 1

        if not changed and k + 1 < n_levels:
            best_all[k] = best_all[k + 1]
            best_largest[k] = best_largest[k + 1]
            continue

        # Scan live roots, compacting out merged entries; refresh IoUs for
        # components whose box changed since the last checkpoint.
        write = 0
        mx_all = 0.0
        big_area = np.int64(-1)
        big_first = -1
        big_iou = 0.0
        for idx in range(n_roots):
            r = roots[idx]
            if parent[r] != r:
                continue
            roots[write] = r
            write += 1
            if stale[r]:
                cx0 = np.int64(bx0[r])
                cy0 = np.int64(by0[r])
                cx1 = np.int64(bx1[r])
                cy1 = np.int64(by1[r])
                carea = (cx1 - cx0) * (cy1 - cy0)
                best = 0.0
                for g in range(n_gt):
                    iw = min(cx1, gt_boxes[g, 2]) - max(cx0, gt_boxes[g, 0])
                    if iw <= 0:
                        continue
                    ih = min(cy1, gt_boxes[g, 3]) - max(cy0, gt_boxes[g, 1])
                    if ih <= 0:
                        continue
                    inter = iw * ih
                    garea = (gt_boxes[g, 2] - gt_boxes[g, 0]) * (
                        gt_boxes[g, 3] - gt_boxes[g, 1]
                    )
                    iou = inter / (carea + garea - inter)
                    if iou > best:
                        best = iou
                iou_cache[r] = best
                stale[r] = 0
            v = iou_cache[r]
            if v > mx_all:
                mx_all = v
            a = area[r]
            if a > big_area or (a == big_area and first_pix[r] < big_first):
                big_area = a
                big_first = first_pix[r]
                big_iou = v
        n_roots = write
        best_all[k] = mx_all
        best_largest[k] = big_iou

    return best_all, best_largest


def sweep_image(values: np.ndarray, taus: np.ndarray, gt_boxes: np.ndarray):
    """Best component-box IoU per threshold for one score map.

    values:   2-D float array (normalized scores)
    taus:     ascending 1-D float64 threshold grid
    gt_boxes: int array of shape (n, 4), half-open (x0, y0, x1, y1)

    Returns (best_all, best_largest) aligned with taus; see _sweep_kernel.
    """
    height, width = values.shape
    levels = (
        np.searchsorted(taus, values.ravel(), side="right").astype(np.int32) - 1
    )
    gt = np.ascontiguousarray(gt_boxes, dtype=np.int64)
    return _sweep_kernel(levels, height, width, len(taus), gt)
