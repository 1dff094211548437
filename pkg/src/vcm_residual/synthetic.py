"""Seeded generator of textured test frames (multi-scale noise plus shapes)."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .sift import Image


def textured_frame(rng: np.random.Generator, height: int = 128, width: int = 128) -> Image:
    img = np.zeros((height, width))
    for sigma, amp in ((1.0, 0.35), (2.5, 0.6), (6.0, 1.0)):
        layer = gaussian_filter(rng.standard_normal((height, width)), sigma, mode="wrap")
        img += amp * layer / (layer.std() + 1e-12)

    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(int(rng.integers(4, 12))):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        ry, rx = rng.uniform(2, height / 6), rng.uniform(2, width / 6)
        level = rng.uniform(-2.5, 2.5)
        if rng.random() < 0.5:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        img[mask] += level

    lo, hi = np.percentile(img, [1, 99])
    img = (img - lo) / (hi - lo + 1e-12) * 215.0 + 20.0
    return Image(np.clip(np.rint(img), 0, 255))


def textured_corpus(seed: int, count: int, height: int = 128, width: int = 128) -> list[Image]:
    rng = np.random.default_rng(seed)
    return [textured_frame(rng, height, width) for _ in range(count)]
