"""Score-map container and per-map transforms.

A score map is one real-valued H x W array per image, scoring each pixel's
relevance to the image's category. All transforms are pure functions that
return new maps; inputs are never mutated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSigma, NegativeValues, ScoreMapError


@dataclass
class ScoreMap:
    """A per-image score map plus bookkeeping flags.

    ``normalized`` asserts every value lies in [0, 1]. ``degenerate`` marks a
    map that was constant before normalization and was collapsed to zeros;
    downstream box metrics treat such maps as guaranteed misses.
    """

    image_id: str
    values: np.ndarray = field(repr=False)
    normalized: bool = False
    degenerate: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.size == 0:
            raise ScoreMapError(
                f"{self.image_id}: score map must be a non-empty 2-D array, "
                f"got shape {v.shape}"
            )
        if not np.issubdtype(v.dtype, np.floating):
            v = v.astype(np.float64)
        if not np.isfinite(v).all():
            raise ScoreMapError(f"{self.image_id}: score map contains NaN or infinity")
        if self.normalized:
            lo, hi = float(v.min()), float(v.max())
            if lo < 0.0 or hi > 1.0:
                raise ScoreMapError(
                    f"{self.image_id}: declared normalized but values span "
                    f"[{lo}, {hi}]"
                )
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def normalize_minmax(smap: ScoreMap) -> ScoreMap:
    """Affinely rescale so the minimum maps to 0 and the maximum to 1.

    A constant map has no spread to rescale; it becomes all zeros with the
    ``degenerate`` flag set instead of raising.
    """
    v = smap.values.astype(np.float64)
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return ScoreMap(smap.image_id, np.zeros_like(v), normalized=True, degenerate=True)
    out = (v - lo) / (hi - lo)
    return ScoreMap(smap.image_id, out, normalized=True)


def normalize_max(smap: ScoreMap) -> ScoreMap:
    """Divide by the maximum, keeping zero fixed.

    Requires non-negative input. An all-zero map is returned unchanged with
    the ``degenerate`` flag set.
    """
    v = smap.values.astype(np.float64)
    if float(v.min()) < 0.0:
        raise NegativeValues(
            f"{smap.image_id}: max-normalization requires non-negative values"
        )
    hi = float(v.max())
    if hi == 0.0:
        return ScoreMap(smap.image_id, np.zeros_like(v), normalized=True, degenerate=True)
    return ScoreMap(smap.image_id, v / hi, normalized=True)


def threshold(smap: ScoreMap, tau: float) -> np.ndarray:
    """Binary mask of pixels scoring at least ``tau``.

    The map must be normalized and ``tau`` must lie in [0, 1].
    """
    if not smap.normalized:
        raise ScoreMapError(f"{smap.image_id}: threshold requires a normalized map")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return smap.values >= tau


def resize_bilinear(smap: ScoreMap, out_height: int, out_width: int) -> ScoreMap:
    """Resample to a new resolution with bilinear interpolation.

    Sample positions use half-pixel centers: output pixel i reads input
    coordinate (i + 0.5) * scale - 0.5, clamped to the valid range, so corner
    values are preserved and no value leaves the input's [min, max] envelope.
    """
    if out_height < 1 or out_width < 1:
        raise ValueError(f"target size must be positive, got {out_height}x{out_width}")
    v = smap.values
    in_h, in_w = v.shape
    if (in_h, in_w) == (out_height, out_width):
        return ScoreMap(smap.image_id, v.copy(), smap.normalized, smap.degenerate)

    ys = (np.arange(out_height, dtype=np.float64) + 0.5) * (in_h / out_height) - 0.5
    xs = (np.arange(out_width, dtype=np.float64) + 0.5) * (in_w / out_width) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)

    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    top = v[np.ix_(y0, x0)] * (1.0 - fx) + v[np.ix_(y0, x1)] * fx
    bot = v[np.ix_(y1, x0)] * (1.0 - fx) + v[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bot * fy
    return ScoreMap(smap.image_id, out, smap.normalized, smap.degenerate)


def _gaussian_weights(sigma: float) -> np.ndarray:
    radius = math.ceil(3.0 * sigma)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def _convolve_axis(values: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(weights) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(values, pad, mode="edge")
    out = np.zeros_like(values)
    for offset, w in enumerate(weights):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(offset, offset + values.shape[axis])
        out += w * padded[tuple(sl)]
    return out


def gaussian_blur(smap: ScoreMap, sigma: float) -> ScoreMap:
    """Separable Gaussian smoothing.

    The truncated kernel has radius ceil(3 * sigma) and is renormalized to
    sum to one; borders are handled by replicating edge values. Because the
    kernel is a convex combination, normalized maps stay normalized.
    """
    if sigma <= 0.0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    w = _gaussian_weights(sigma)
    out = _convolve_axis(smap.values.astype(np.float64), w, axis=0)
    out = _convolve_axis(out, w, axis=1)
    # Convexity keeps values inside [min, max]; clip away float dust so the
    # normalized invariant holds exactly.
    if smap.normalized:
        out = np.clip(out, 0.0, 1.0)
    return ScoreMap(smap.image_id, out, smap.normalized, smap.degenerate)


def center_gaussian(
    height: int,
    width: int,
    sigma: float = 1.0,
    image_id: str = "center-gaussian",
) -> ScoreMap:
    """Isotropic Gaussian bump centered on the image.

    Coordinates are expressed in units of half the shorter side, so ``sigma``
    is resolution-independent. The map peaks at the geometric center with
    value 1 and decays radially; it is returned already normalized.
    """
    if height < 1 or width < 1:
        raise ValueError(f"image size must be positive, got {height}x{width}")
    if sigma <= 0.0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    unit = min(height, width) / 2.0
    ys = (np.arange(height, dtype=np.float64) - (height - 1) / 2.0) / unit
    xs = (np.arange(width, dtype=np.float64) - (width - 1) / 2.0) / unit
    sq = ys[:, None] ** 2 + xs[None, :] ** 2
    values = np.exp(-sq / (2.0 * sigma * sigma))
    return ScoreMap(image_id, values, normalized=True)
