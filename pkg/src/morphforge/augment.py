"""Noise/blur corruption operators, five-version expansion and the
normalized 224x224 crop.

Parameter ranges per corruption:

    motion blur     length in [0.5%, 1.0%] of image height, angle in [0, pi)
    Gaussian blur   sigma in [0.25%, 0.5%] of image height
    salt & pepper   1% of all pixel sites
    Gaussian noise  std 0.05 on [0, 1] intensities
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate

from . import errors
from .image import as_image, gaussian_blur, sample_bilinear
from .landmarks import LOWER_LIP_BOTTOM, LandmarkSet

CROP_SIZE = 224
MOTION_LENGTH_RANGE = (0.005, 0.010)   # fraction of image height
GAUSS_SIGMA_RANGE = (0.0025, 0.005)    # fraction of image height
SALT_PEPPER_FRACTION = 0.01
GAUSS_NOISE_STD = 0.05


@dataclass(frozen=True)
class AugmentSpec:
    """Provenance of one corruption draw."""

    kind: str  # none | motion_blur | gaussian_blur | salt_pepper | gaussian_noise
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def encode(self) -> str:
        items = ";".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({items};seed={self.seed})"


def motion_blur(img, length, angle) -> np.ndarray:
    """Convolve with a normalized 1-D line kernel, edge-clamped."""
    img = as_image(img)
    if length <= 0:
        raise errors.NonPositiveLength(f"length must be positive, got {length}")
    n = int(round(length))
    if n <= 1:
        return img.copy()
    # rasterize the line through the kernel center
    half = (n - 1) / 2.0
    ts = np.arange(n) - half
    xs = ts * np.cos(angle)
    ys = ts * np.sin(angle)
    r = int(np.ceil(half)) + 1
    kernel = np.zeros((2 * r + 1, 2 * r + 1))
    ix = np.round(xs).astype(int) + r
    iy = np.round(ys).astype(int) + r
    np.add.at(kernel, (iy, ix), 1.0)
    kernel /= kernel.sum()
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = correlate(img[:, :, c], kernel, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def salt_pepper(img, fraction, rng) -> np.ndarray:
    """Set exactly round(fraction*W*H) distinct sites to 0 or 1."""
    img = as_image(img)
    if not 0.0 < fraction < 1.0:
        raise errors.BadFraction(f"fraction must be in (0, 1), got {fraction}")
    h, w = img.shape[:2]
    count = int(round(fraction * w * h))
    out = img.copy()
    if count == 0:
        return out
    sites = rng.choice(h * w, size=count, replace=False)
    values = rng.integers(0, 2, size=count).astype(np.float64)
    ys, xs = np.divmod(sites, w)
    out[ys, xs, :] = values[:, None]
    return out


def gaussian_noise(img, std, rng) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise per channel, clamped."""
    img = as_image(img)
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    if std == 0:
        return img.copy()
    return np.clip(img + rng.normal(0.0, std, size=img.shape), 0.0, 1.0)


def expand_five(img, rng):
    """The original plus the four corruptions, parameters drawn per image.

    Returns a list of five (image, AugmentSpec) tuples; the first entry is
    the untouched input.
    """
    img = as_image(img)
    h = img.shape[0]
    out = [(img.copy(), AugmentSpec(kind="none"))]

    length = rng.uniform(*MOTION_LENGTH_RANGE) * h
    angle = rng.uniform(0.0, np.pi)
    out.append((motion_blur(img, max(length, 1e-9), angle),
                AugmentSpec(kind="motion_blur",
                            params={"length": length, "angle": angle})))

    sigma = rng.uniform(*GAUSS_SIGMA_RANGE) * h
    out.append((np.clip(gaussian_blur(img, sigma), 0.0, 1.0),
                AugmentSpec(kind="gaussian_blur", params={"sigma": sigma})))

    sp_seed = int(rng.integers(0, 2 ** 31))
    out.append((salt_pepper(img, SALT_PEPPER_FRACTION,
                            np.random.default_rng(sp_seed)),
                AugmentSpec(kind="salt_pepper",
                            params={"fraction": SALT_PEPPER_FRACTION}, seed=sp_seed)))

    gn_seed = int(rng.integers(0, 2 ** 31))
    out.append((gaussian_noise(img, GAUSS_NOISE_STD,
                               np.random.default_rng(gn_seed)),
                AugmentSpec(kind="gaussian_noise",
                            params={"std": GAUSS_NOISE_STD}, seed=gn_seed)))
    return out


def apply_spec(img, spec: AugmentSpec) -> np.ndarray:
    """Re-apply a recorded corruption; inverse of expand_five's bookkeeping."""
    if spec.kind == "none":
        return as_image(img).copy()
    if spec.kind == "motion_blur":
        return motion_blur(img, max(spec.params["length"], 1e-9), spec.params["angle"])
    if spec.kind == "gaussian_blur":
        return np.clip(gaussian_blur(img, spec.params["sigma"]), 0.0, 1.0)
    if spec.kind == "salt_pepper":
        return salt_pepper(img, spec.params["fraction"], np.random.default_rng(spec.seed))
    if spec.kind == "gaussian_noise":
        return gaussian_noise(img, spec.params["std"], np.random.default_rng(spec.seed))
    raise errors.ParseError(f"unknown augment kind {spec.kind!r}")


def _crop_frame(lm: LandmarkSet, size):
    """Rotation and square box shared by normalize_crop and crop_landmarks.

    Returns (pivot, cos_r, sin_r, x_lo, y_lo, scale) where scale maps
    output pixels to rotated source units.
    """
    pts = lm.points
    eye_l, eye_r = lm.eye_centers
    pivot = 0.5 * (eye_l + eye_r)
    rot = np.arctan2(eye_r[1] - eye_l[1], eye_r[0] - eye_l[0])
    cos_r, sin_r = np.cos(rot), np.sin(rot)

    d = pts - pivot
    rpts = pivot + np.stack(
        [cos_r * d[:, 0] + sin_r * d[:, 1],
         -sin_r * d[:, 0] + cos_r * d[:, 1]], axis=-1)
    x_lo = rpts[36, 0]
    x_hi = rpts[45, 0]
    if x_lo > x_hi:
        x_lo, x_hi = x_hi, x_lo
    y_lo = min(rpts[17:27, 1].min(), rpts[36:48, 1].min())
    y_hi = rpts[LOWER_LIP_BOTTOM, 1]
    # expand the shorter dimension to a square box
    span = max(x_hi - x_lo, y_hi - y_lo)
    cx = 0.5 * (x_lo + x_hi)
    cy = 0.5 * (y_lo + y_hi)
    return pivot, cos_r, sin_r, cx - span / 2.0, cy - span / 2.0, span / size


def normalize_crop(img, lm: LandmarkSet, shift=(0, 0), size=CROP_SIZE) -> np.ndarray:
    """Eye-level rotation plus scale/crop of the inner face to size x size.

    The crop box spans the outer eye corners horizontally and the
    eyebrow-top-to-lower-lip range vertically; the shorter dimension is
    expanded to reach a square before scaling. Out-of-bounds samples
    replicate the edge. shift translates the crop (in output pixels).
    """
    img = as_image(img)
    pivot, cos_r, sin_r, x_lo, y_lo, scale = _crop_frame(lm, size)

    u = np.arange(size, dtype=np.float64) + 0.5
    ox = x_lo + (u - shift[0]) * scale - 0.5 * scale
    oy = y_lo + (u - shift[1]) * scale - 0.5 * scale
    gx, gy = np.meshgrid(ox, oy)
    # rotate the grid back into original image coordinates
    dx = gx - pivot[0]
    dy = gy - pivot[1]
    sx = pivot[0] + cos_r * dx - sin_r * dy
    sy = pivot[1] + sin_r * dx + cos_r * dy
    return sample_bilinear(img, sx, sy)  # edge replication via clamping


def crop_landmarks(lm: LandmarkSet, shift=(0, 0), size=CROP_SIZE) -> LandmarkSet:
    """Landmarks of normalize_crop's output, clamped to the crop frame.

    Jaw points usually fall outside the inner-face box; they clamp to the
    border, which leaves the eye, nose and mouth groups unaffected.
    """
    pivot, cos_r, sin_r, x_lo, y_lo, scale = _crop_frame(lm, size)
    d = lm.points - pivot
    rx = pivot[0] + cos_r * d[:, 0] + sin_r * d[:, 1]
    ry = pivot[1] - sin_r * d[:, 0] + cos_r * d[:, 1]
    ox = (rx - x_lo) / scale + shift[0]
    oy = (ry - y_lo) / scale + shift[1]
    pts = np.stack([np.clip(ox, 0.0, size - 1.0),
                    np.clip(oy, 0.0, size - 1.0)], axis=-1)
    return LandmarkSet(pts, image_width=size, image_height=size)
