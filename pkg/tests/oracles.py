"""Independent reference implementations used only by the test suite.

Everything here is written from the metric definitions directly, favoring
obviousness over speed, and deliberately shares no code with the package:
flood-fill component labeling instead of scipy labeling, per-pixel counting
instead of closed-form IoU, full rescans per threshold instead of
incremental sweeps, O(n^2) pair counting instead of library rank
correlation.
"""
from collections import deque

import numpy as np


def flood_fill_boxes(mask):
    """Connected components by BFS flood fill (8-connectivity); returns the
    tightest (x0, y0, x1, y1) half-open box per component, in order of each
    component's first row-major pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    visited = np.zeros((h, w), dtype=bool)
    boxes = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or visited[y, x]:
                continue
            min_x = max_x = x
            min_y = max_y = y
            queue = deque([(y, x)])
            visited[y, x] = True
            while queue:
                cy, cx = queue.popleft()
                if cx < min_x:
                    min_x = cx
                if cx > max_x:
                    max_x = cx
                if cy < min_y:
                    min_y = cy
                if cy > max_y:
                    max_y = cy
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not visited[ny, nx]:
                            visited[ny, nx] = True
                            queue.append((ny, nx))
            boxes.append((min_x, min_y, max_x + 1, max_y + 1))
    return boxes


def pixel_count_iou(a, b, size):
    """IoU by rasterizing both boxes onto a size x size grid and counting."""
    ga = np.zeros((size, size), dtype=bool)
    gb = np.zeros((size, size), dtype=bool)
    ga[a[1]:a[3], a[0]:a[2]] = True
    gb[b[1]:b[3], b[0]:b[2]] = True
    union = np.logical_or(ga, gb).sum()
    if union == 0:
        return 0.0
    return np.logical_and(ga, gb).sum() / union


def brute_force_pxap(scores, fg):
    """Average precision by scanning every distinct score value: at each
    threshold (descending), count predictions and true positives with a full
    pass, then apply the rectangle rule with previous recall starting at 0."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    fg = np.asarray(fg, dtype=bool).ravel()
    n_fg = int(fg.sum())
    assert n_fg > 0
    ap = 0.0
    prev_recall = 0.0
    for tau in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= tau
        tp = int((predicted & fg).sum())
        precision = tp / int(predicted.sum())
        recall = tp / n_fg
        ap += precision * (recall - prev_recall)
        prev_recall = recall
    return ap


def brute_force_kendall(a, b):
    """Tau-b by explicit pair enumeration."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = len(a)
    concordant = discordant = ties_a = ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = a[i] - a[j]
            db = b[i] - b[j]
            if da == 0 and db == 0:
                continue
            if da == 0:
                ties_a += 1
            elif db == 0:
                ties_b += 1
            elif (da > 0) == (db > 0):
                concordant += 1
            else:
                discordant += 1
    denom = np.sqrt(
        (concordant + discordant + ties_a) * (concordant + discordant + ties_b)
    )
    return (concordant - discordant) / denom


def dense_gaussian_blur(values, sigma):
    """Brute-force 2-D convolution with the truncated, renormalized Gaussian
    kernel and replicate padding: quadratic in kernel size, per-pixel loops."""
    values = np.asarray(values, dtype=np.float64)
    radius = int(np.ceil(3.0 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w1 = np.exp(-(k * k) / (2.0 * sigma * sigma))
    kernel = np.outer(w1, w1)
    kernel /= kernel.sum()
    h, w = values.shape
    out = np.zeros_like(values)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    sy = min(max(y + dy, 0), h - 1)
                    sx = min(max(x + dx, 0), w - 1)
                    acc += kernel[dy + radius, dx + radius] * values[sy, sx]
            out[y, x] = acc
    return out


def scalar_bilinear(values, out_h, out_w):
    """Per-output-pixel bilinear resample with half-pixel centers."""
    values = np.asarray(values, dtype=np.float64)
    in_h, in_w = values.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            sy = min(max((i + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1.0)
            sx = min(max((j + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1.0)
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
            fy, fx = sy - y0, sx - x0
            out[i, j] = (
                values[y0, x0] * (1 - fy) * (1 - fx)
                + values[y0, x1] * (1 - fy) * fx
                + values[y1, x0] * fy * (1 - fx)
                + values[y1, x1] * fy * fx
            )
    return out


def best_iou_at_tau(values, tau, gt_boxes, size_hint=None):
    """Best component-box IoU at one threshold, from first principles:
    flood-fill boxes, then exhaustive pairwise pixel-free IoU."""
    mask = np.asarray(values) >= tau
    est = flood_fill_boxes(mask)
    best = 0.0
    for e in est:
        for g in gt_boxes:
            iw = min(e[2], g[2]) - max(e[0], g[0])
            ih = min(e[3], g[3]) - max(e[1], g[1])
            if iw <= 0 or ih <= 0:
                continue
            inter = iw * ih
            area_e = (e[2] - e[0]) * (e[3] - e[1])
            area_g = (g[2] - g[0]) * (g[3] - g[1])
            v = inter / (area_e + area_g - inter)
            if v > best:
                best = v
    return best


def largest_component_iou_at_tau(values, tau, gt_boxes):
    """Legacy-metric reference: IoU of only the largest component's box
    (ties: first component in row-major discovery order, which is the
    component holding the earliest pixel)."""
    mask = np.asarray(values) >= tau
    boxes = flood_fill_boxes(mask)
    if not boxes:
        return 0.0
    areas = []
    # recompute component pixel counts with an independent pass
    lab = np.full(mask.shape, -1, dtype=int)
    h, w = mask.shape
    comp = -1
    visited = np.zeros_like(mask)
    first_pixels = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or visited[y, x]:
                continue
            comp += 1
            first_pixels.append((y, x))
            stack = [(y, x)]
            visited[y, x] = True
            count = 0
            while stack:
                cy, cx = stack.pop()
                lab[cy, cx] = comp
                count += 1
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not visited[ny, nx]:
                            visited[ny, nx] = True
                            stack.append((ny, nx))
            areas.append(count)
    best_idx = 0
    for i in range(1, len(areas)):
        if areas[i] > areas[best_idx]:
            best_idx = i
    e = boxes[best_idx]
    best = 0.0
    for g in gt_boxes:
        iw = min(e[2], g[2]) - max(e[0], g[0])
        ih = min(e[3], g[3]) - max(e[1], g[1])
        if iw <= 0 or ih <= 0:
            continue
        inter = iw * ih
        area_e = (e[2] - e[0]) * (e[3] - e[1])
        area_g = (g[2] - g[0]) * (g[3] - g[1])
        v = inter / (area_e + area_g - inter)
        if v > best:
            best = v
    return best
