"""
SIFT keypoint detection (location, scale, orientation, response; no descriptors).

The detector follows Lowe's pipeline: Gaussian scale space, difference of
Gaussians, 3x3x3 extrema, quadratic refinement, contrast/edge rejection and a
36-bin orientation histogram. Every arithmetic step is plain elementwise numpy
(no BLAS reductions), so a given input always produces bitwise-identical
keypoints regardless of thread settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter, minimum_filter

from .errors import DimensionMismatch, ImageTooSmall, InvalidParams

MIN_IMAGE_SIDE = 16
ORI_BINS = 36
ORI_PEAK_RATIO = 0.8
ORI_RADIUS = 3 * 1.5
ORI_SIG_FACTOR = 1.5
MAX_INTERP_STEPS = 5


def grid(v: float) -> int:
    """Nearest sampling point (half rounds up); coordinates are non-negative."""
    return math.floor(v + 0.5)


def to_f32(v: float) -> float:
    return float(np.float32(v))


@dataclass(frozen=True, eq=False)
class Image:
    """A grayscale frame; ``samples`` is an (height, width) array in [0, 255]."""

    samples: np.ndarray

    def __post_init__(self):
        a = np.array(self.samples, dtype=np.float64)
        if a.ndim != 2:
            raise InvalidParams(f"image must be 2-D, got shape {a.shape}")
        if min(a.shape) < MIN_IMAGE_SIDE:
            raise ImageTooSmall(f"image {a.shape[1]}x{a.shape[0]} below {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")
        if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > 255:
            raise InvalidParams("samples must be finite and within [0, 255]")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class SiftParams:
    layers_per_octave: int = 3
    base_sigma: float = 1.6
    contrast_threshold: float = 0.04
    edge_threshold: float = 10.0
    border: int = 5
    max_octaves: Optional[int] = None
    upsample: bool = False
    # blur already present in the input, as assumed by the reference extractor
    assumed_blur: float = 0.5

    def __post_init__(self):
        if self.layers_per_octave < 1:
            raise InvalidParams("layers_per_octave must be >= 1")
        if not self.base_sigma > 0:
            raise InvalidParams("base_sigma must be > 0")
        if not self.contrast_threshold > 0:
            raise InvalidParams("contrast_threshold must be > 0")
        if not self.edge_threshold >= 1:
            raise InvalidParams("edge_threshold must be >= 1")
        if self.border < 1:
            raise InvalidParams("border must be >= 1")
        if self.max_octaves is not None and self.max_octaves < 1:
            raise InvalidParams("max_octaves must be >= 1 or None")
        if self.assumed_blur < 0:
            raise InvalidParams("assumed_blur must be >= 0")


FIELDS = ("x", "y", "size", "orientation", "response")


@dataclass(frozen=True, slots=True)
class Keypoint:
    x: float
    y: float
    size: float
    orientation: float
    response: float

    def __post_init__(self):
        vals = (self.x, self.y, self.size, self.orientation, self.response)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParams(f"non-finite keypoint field in {vals}")
        if self.x < 0 or self.y < 0:
            raise InvalidParams(f"negative keypoint position ({self.x}, {self.y})")
        if not self.size > 0:
            raise InvalidParams(f"keypoint size must be > 0, got {self.size}")
        if not 0 <= self.orientation < 360:
            raise InvalidParams(f"orientation {self.orientation} outside [0, 360)")
        if self.response < 0:
            raise InvalidParams(f"negative response {self.response}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x, self.y, self.size, self.orientation, self.response)

    def sort_key(self):
        # exact (y, x) close the order so it never depends on arrival order
        return (grid(self.y), grid(self.x), self.size, self.orientation, self.response, self.y, self.x)


@dataclass(frozen=True)
class KeypointSet:
    """Keypoints of one frame in canonical order.

    Use :meth:`canonical` to build one from an arbitrary iterable; the
    constructor only accepts lists that are already canonical.
    """

    frame_id: int
    keypoints: tuple[Keypoint, ...]

    def __post_init__(self):
        kps = tuple(self.keypoints)
        object.__setattr__(self, "keypoints", kps)
        for a, b in zip(kps, kps[1:]):
            if not a.sort_key() < b.sort_key():
                raise InvalidParams("keypoints are not in canonical order or contain duplicates")

    @classmethod
    def canonical(cls, frame_id: int, keypoints: Iterable[Keypoint]) -> "KeypointSet":
        uniq = {kp.as_tuple(): kp for kp in keypoints}
        return cls(frame_id, tuple(sorted(uniq.values(), key=Keypoint.sort_key)))

    def __len__(self) -> int:
        return len(self.keypoints)

    def __iter__(self):
        return iter(self.keypoints)

    def __getitem__(self, i: int) -> Keypoint:
        return self.keypoints[i]


def image_psnr(a: Image, b: Image) -> float:
    """Peak-255 PSNR in dB; ``inf`` when the images are identical."""
    if a.samples.shape != b.samples.shape:
        raise DimensionMismatch(f"{a.samples.shape} vs {b.samples.shape}")
    mse = float(np.mean((a.samples - b.samples) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


# -- scale space ---------------------------------------------------------------


def _downsample(level: np.ndarray) -> np.ndarray:
    # 2x2 block mean keeps the coarse grid centred, so 90-degree rotations of
    # even-sized frames map octave grids onto each other exactly
    h, w = level.shape
    a = level[: h - h % 2, : w - w % 2]
    return 0.25 * ((a[0::2, 0::2] + a[1::2, 1::2]) + (a[0::2, 1::2] + a[1::2, 0::2]))


def _upsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape

    def along(a, axis):
        a = np.moveaxis(a, axis, 0)
        out = np.empty((2 * a.shape[0],) + a.shape[1:])
        out[0::2] = a
        out[1:-1:2] = 0.5 * (a[:-1] + a[1:])
        out[-1] = a[-1]
        return np.moveaxis(out, 0, axis)

    return along(along(img, 0), 1)


def _octave_count(h: int, w: int, params: SiftParams) -> int:
    n = max(1, int(round(math.log2(min(h, w)))) - 2)
    # each octave must still hold a 3x3 neighbourhood inside the border
    size = min(h, w)
    fit = 0
    while size >= 2 * params.border + 3:
        fit += 1
        size //= 2
    n = min(n, fit)
    if params.max_octaves is not None:
        n = min(n, params.max_octaves)
    return n


def _build_octaves(base: np.ndarray, params: SiftParams, n_octaves: int):
    s = params.layers_per_octave
    k = 2.0 ** (1.0 / s)
    totals = [params.base_sigma * k ** i for i in range(s + 3)]
    incr = [0.0] + [math.sqrt(totals[i] ** 2 - totals[i - 1] ** 2) for i in range(1, s + 3)]
    octaves = []
    img = base
    for o in range(n_octaves):
        if o > 0:
            img = _downsample(octaves[-1][s])
        levels = [img]
        for i in range(1, s + 3):
            levels.append(gaussian_filter(levels[-1], incr[i], mode="reflect", truncate=4.0))
        octaves.append(levels)
    return octaves


# -- localisation --------------------------------------------------------------


def _derivatives(dog: np.ndarray, l, r, c):
    v = dog[l, r, c]
    xp, xm = dog[l, r, c + 1], dog[l, r, c - 1]
    yp, ym = dog[l, r + 1, c], dog[l, r - 1, c]
    sp, sm = dog[l + 1, r, c], dog[l - 1, r, c]
    g = (0.5 * (xp - xm), 0.5 * (yp - ym), 0.5 * (sp - sm))
    dxx = xp + xm - 2.0 * v
    dyy = yp + ym - 2.0 * v
    dss = sp + sm - 2.0 * v
    dxy = 0.25 * ((dog[l, r + 1, c + 1] - dog[l, r + 1, c - 1]) - (dog[l, r - 1, c + 1] - dog[l, r - 1, c - 1]))
    dxs = 0.25 * ((dog[l + 1, r, c + 1] - dog[l + 1, r, c - 1]) - (dog[l - 1, r, c + 1] - dog[l - 1, r, c - 1]))
    dys = 0.25 * ((dog[l + 1, r + 1, c] - dog[l + 1, r - 1, c]) - (dog[l - 1, r + 1, c] - dog[l - 1, r - 1, c]))
    return v, g, (dxx, dyy, dss, dxy, dxs, dys)


def _solve_offsets(g, hess):
    """Offset = -H^-1 g for a batch of symmetric 3x3 Hessians (adjugate form)."""
    a, b, c, d, e, f = hess
    gx, gy, gs = g
    c11 = b * c - f * f
    c12 = e * f - d * c
    c13 = d * f - b * e
    c22 = a * c - e * e
    c23 = d * e - a * f
    c33 = a * b - d * d
    det = a * c11 + d * c12 + e * c13
    with np.errstate(divide="ignore", invalid="ignore"):
        ox = -(c11 * gx + c12 * gy + c13 * gs) / det
        oy = -(c12 * gx + c22 * gy + c23 * gs) / det
        os_ = -(c13 * gx + c23 * gy + c33 * gs) / det
    return ox, oy, os_


def _find_candidates(dog: np.ndarray, params: SiftParams):
    s = params.layers_per_octave
    _, h, w = dog.shape
    b = params.border
    prefilter = 0.5 * params.contrast_threshold / s
    inner = dog[1 : s + 1, b : h - b, b : w - b]
    mx = maximum_filter(dog, size=3, mode="nearest")[1 : s + 1, b : h - b, b : w - b]
    mn = minimum_filter(dog, size=3, mode="nearest")[1 : s + 1, b : h - b, b : w - b]
    hit = ((inner > prefilter) & (inner >= mx)) | ((inner < -prefilter) & (inner <= mn))
    l, r, c = np.nonzero(hit)
    return l + 1, r + b, c + b


def _localize(dog: np.ndarray, params: SiftParams):
    """Refine candidates; returns integer cells, offsets and interpolated contrast."""
    s = params.layers_per_octave
    _, h, w = dog.shape
    b = params.border
    l, r, c = _find_candidates(dog, params)
    n = len(l)
    alive = np.ones(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    ox = np.zeros(n)
    oy = np.zeros(n)
    os_ = np.zeros(n)
    gsave = [np.zeros(n), np.zeros(n), np.zeros(n)]
    vsave = np.zeros(n)
    hsave = [np.zeros(n) for _ in range(6)]

    for _ in range(MAX_INTERP_STEPS):
        act = np.nonzero(alive & ~done)[0]
        if len(act) == 0:
            break
        v, g, hess = _derivatives(dog, l[act], r[act], c[act])
        dx, dy, ds = _solve_offsets(g, hess)
        finite = np.isfinite(dx) & np.isfinite(dy) & np.isfinite(ds)
        conv = finite & (np.abs(dx) < 0.5) & (np.abs(dy) < 0.5) & (np.abs(ds) < 0.5)

        idx = act[conv]
        done[idx] = True
        ox[idx], oy[idx], os_[idx] = dx[conv], dy[conv], ds[conv]
        vsave[idx] = v[conv]
        for k in range(3):
            gsave[k][idx] = g[k][conv]
        for k in range(6):
            hsave[k][idx] = hess[k][conv]

        moving = ~conv
        alive[act[moving & ~finite]] = False
        step = act[moving & finite]
        sel = moving & finite
        c[step] += np.rint(dx[sel]).astype(np.int64)
        r[step] += np.rint(dy[sel]).astype(np.int64)
        l[step] += np.rint(ds[sel]).astype(np.int64)
        outside = (l[step] < 1) | (l[step] > s) | (c[step] < b) | (c[step] >= w - b) | (r[step] < b) | (r[step] >= h - b)
        alive[step[outside]] = False

    keep = alive & done
    contrast = vsave + 0.5 * ((gsave[0] * ox + gsave[1] * oy) + gsave[2] * os_)
    keep &= np.abs(contrast) * s >= params.contrast_threshold
    dxx, dyy, dxy = hsave[0], hsave[1], hsave[3]
    tr = dxx + dyy
    det = dxx * dyy - dxy * dxy
    er = params.edge_threshold
    keep &= (det > 0) & (tr * tr * er < (er + 1) ** 2 * det)
    i = np.nonzero(keep)[0]
    return l[i], r[i], c[i], ox[i], oy[i], os_[i], np.abs(contrast[i])


# -- orientation ---------------------------------------------------------------


def _gradient_bins(level: np.ndarray):
    gx = np.zeros_like(level)
    gy = np.zeros_like(level)
    gx[1:-1, 1:-1] = level[1:-1, 2:] - level[1:-1, :-2]
    gy[1:-1, 1:-1] = level[2:, 1:-1] - level[:-2, 1:-1]
    mag = np.sqrt(gx * gx + gy * gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 360.0
    bins = np.rint(ang * (ORI_BINS / 360.0)).astype(np.int64) % ORI_BINS
    return mag, bins


def _orientations(mag: np.ndarray, bins: np.ndarray, r: int, c: int, scale: float) -> list[float]:
    h, w = mag.shape
    radius = grid(ORI_RADIUS * scale)
    sigma = ORI_SIG_FACTOR * scale
    r0, r1 = max(r - radius, 1), min(r + radius, h - 2)
    c0, c1 = max(c - radius, 1), min(c + radius, w - 2)
    if r0 > r1 or c0 > c1:
        return []
    dy = np.arange(r0, r1 + 1) - r
    dx = np.arange(c0, c1 + 1) - c
    wgt = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * sigma * sigma))
    raw = np.bincount(
        bins[r0 : r1 + 1, c0 : c1 + 1].ravel(),
        weights=(wgt * mag[r0 : r1 + 1, c0 : c1 + 1]).ravel(),
        minlength=ORI_BINS,
    )
    hist = (
        (np.roll(raw, 2) + np.roll(raw, -2)) * (1.0 / 16)
        + (np.roll(raw, 1) + np.roll(raw, -1)) * (4.0 / 16)
        + raw * (6.0 / 16)
    )
    top = hist.max()
    if not top > 0:
        return []
    left, right = np.roll(hist, 1), np.roll(hist, -1)
    peaks = np.nonzero((hist > left) & (hist > right) & (hist >= ORI_PEAK_RATIO * top))[0]
    out = []
    for j in peaks:
        lv, cv, rv = left[j], hist[j], right[j]
        b = (j + 0.5 * (lv - rv) / (lv - 2.0 * cv + rv)) % ORI_BINS
        out.append(b * (360.0 / ORI_BINS))
    return out


# -- public entry point --------------------------------------------------------


def extract_keypoints(image: Image, params: SiftParams = SiftParams(), frame_id: int = 0) -> KeypointSet:
    """Detect SIFT keypoints of ``image`` and return them in canonical order.

    Fields are rounded to float32 so they survive the residual bitstream
    unchanged. ``size`` is a diameter in input samples and ``orientation`` is
    measured in image coordinates (y down), in degrees.
    """
    if not isinstance(params, SiftParams):
        raise InvalidParams("params must be SiftParams")
    h, w = image.height, image.width
    if min(h, w) < 2 * params.border + 3:
        raise ImageTooSmall(f"min side {min(h, w)} < 2*border+3 = {2 * params.border + 3}")

    img = image.samples / 255.0
    coord_scale = 1.0
    prior = params.assumed_blur
    if params.upsample:
        img = _upsample(img)
        coord_scale = 0.5
        prior *= 2.0
    sig0 = math.sqrt(max(params.base_sigma ** 2 - prior ** 2, 0.01))
    base = gaussian_filter(img, sig0, mode="reflect", truncate=4.0)

    s = params.layers_per_octave
    n_oct = _octave_count(*base.shape, params)
    octaves = _build_octaves(base, params, n_oct)

    found: list[Keypoint] = []
    for o, levels in enumerate(octaves):
        dog = np.stack([levels[i + 1] - levels[i] for i in range(s + 2)])
        l, r, c, ox, oy, os_, resp = _localize(dog, params)
        if len(l) == 0:
            continue
        grads = {}
        unit = 2.0 ** o
        for k in range(len(l)):
            layer = int(l[k])
            if layer not in grads:
                grads[layer] = _gradient_bins(levels[layer])
            mag, bins = grads[layer]
            scale_oct = params.base_sigma * 2.0 ** ((layer + os_[k]) / s)
            x = ((c[k] + ox[k] + 0.5) * unit - 0.5) * coord_scale
            y = ((r[k] + oy[k] + 0.5) * unit - 0.5) * coord_scale
            size = to_f32(2.0 * scale_oct * unit * coord_scale)
            response = to_f32(resp[k])
            x, y = to_f32(x), to_f32(y)
            if x >= w or y >= h:
                continue
            for angle in _orientations(mag, bins, int(r[k]), int(c[k]), scale_oct):
                angle = to_f32(angle)
                if angle >= 360.0:
                    angle = 0.0
                found.append(Keypoint(x, y, size, angle, response))
    return KeypointSet.canonical(frame_id, found)


def keypoint_arrays(kps: Sequence[Keypoint]) -> np.ndarray:
    """(n, 5) float64 array of keypoint fields in :data:`FIELDS` order."""
    return np.array([kp.as_tuple() for kp in kps], dtype=np.float64).reshape(-1, 5)
