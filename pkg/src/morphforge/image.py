"""Pixel buffers, frequency-band split and polar resampling.

Images are numpy float64 arrays of shape (H, W, C) with C in {1, 3} and
intensities in [0, 1]. High-frequency bands are signed and therefore not
clamped. All sampling is bilinear with edge clamping.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy.ndimage import correlate1d

from . import errors


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse: center (x, y) and positive semi-axes."""

    center: tuple[float, float]
    semi_axis_x: float
    semi_axis_y: float

    def __post_init__(self):
        if self.semi_axis_x <= 0 or self.semi_axis_y <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def contains(self, x, y):
        """Vectorized point-in-ellipse test (boundary counts as inside)."""
        cx, cy = self.center
        return ((np.asarray(x) - cx) / self.semi_axis_x) ** 2 + (
            (np.asarray(y) - cy) / self.semi_axis_y
        ) ** 2 <= 1.0

    def scaled(self, factor):
        return Ellipse(self.center, self.semi_axis_x * factor, self.semi_axis_y * factor)


@dataclass
class PolarPatch:
    """Annulus resampled on a radial-major (nr, ntheta, C) grid.

    Radius axis spans [r_min, r_max] inclusive; the angular axis is cyclic
    (column 0 is adjacent to the last column).
    """

    center: tuple[float, float]
    r_min: float
    r_max: float
    data: np.ndarray  # (nr, ntheta, C)

    @property
    def radial_samples(self):
        return self.data.shape[0]

    @property
    def angular_samples(self):
        return self.data.shape[1]


def as_image(arr) -> np.ndarray:
    """Coerce to a (H, W, C) float64 image array, validating the shape."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise errors.DimensionMismatch(f"expected (H, W, 1|3) image, got shape {a.shape}")
    return a


def load_image(path) -> np.ndarray:
    """Load a PNG (8- or 16-bit) into a float64 image scaled to [0, 1]."""
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("1", "L", "P"):
                im = im.convert("L")
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif im.mode in ("I", "I;16", "I;16B"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            elif im.mode in ("RGB", "RGBA"):
                im = im.convert("RGB")
                arr = np.asarray(im, dtype=np.float64) / 255.0
            else:
                raise errors.UnsupportedFormat(f"unsupported image mode {im.mode!r}")
    except UnidentifiedImageError as exc:
        raise errors.UnsupportedFormat(str(exc)) from exc
    except (OSError, SyntaxError) as exc:
        raise errors.CorruptData(str(exc)) from exc
    return as_image(np.clip(arr, 0.0, 1.0))


def save_image(img, path):
    """Write an image as 8-bit PNG with round-half-up quantization."""
    img = as_image(img)
    q = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if q.shape[2] == 1:
        PILImage.fromarray(q[:, :, 0], mode="L").save(path, format="PNG")
    else:
        PILImage.fromarray(q, mode="RGB").save(path, format="PNG")


def gaussian_kernel(sigma) -> np.ndarray:
    """Normalized 1-D Gaussian sampled on [-r, r] with r = ceil(3*sigma)."""
    if sigma <= 0:
        raise errors.NonPositiveSigma(f"sigma must be positive, got {sigma}")
    r = int(np.ceil(3.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma) -> np.ndarray:
    """Separable Gaussian blur with edge-clamped boundaries."""
    img = as_image(img)
    k = gaussian_kernel(sigma)
    out = correlate1d(img, k, axis=0, mode="nearest")
    out = correlate1d(out, k, axis=1, mode="nearest")
    return out


def split_frequency(img, sigma):
    """Split into (low, high) bands with low + high == img exactly.

    low is the Gaussian blur of img; high is the signed residual.
    """
    img = as_image(img)
    low = gaussian_blur(img, sigma)
    high = img - low
    return low, high


def sample_bilinear(img, x, y) -> np.ndarray:
    """Bilinear sample at (x, y) pixel coordinates, edge-clamped.

    x/y may be arrays of any shape; returns samples of shape x.shape + (C,).
    Integer coordinates reproduce stored pixel values exactly.
    """
    img = as_image(img)
    h, w = img.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _check_annulus(img, center, r_min, r_max):
    if r_min >= r_max:
        raise errors.DegenerateRadii(f"r_min={r_min} >= r_max={r_max}")
    h, w = img.shape[:2]
    cx, cy = center
    if cx - r_max < 0 or cx + r_max > w - 1 or cy - r_max < 0 or cy + r_max > h - 1:
        raise errors.AnnulusOutOfBounds(
            f"annulus (center={center}, r_max={r_max}) exceeds {w}x{h} image"
        )


def to_polar(img, center, r_min, r_max, nr, ntheta) -> PolarPatch:
    """Resample the annulus [r_min, r_max] around center onto a polar grid."""
    img = as_image(img)
    _check_annulus(img, center, r_min, r_max)
    cx, cy = center
    radii = np.linspace(r_min, r_max, nr)
    thetas = np.arange(ntheta) * (2.0 * np.pi / ntheta)
    rr, tt = np.meshgrid(radii, thetas, indexing="ij")
    x = cx + rr * np.cos(tt)
    y = cy + rr * np.sin(tt)
    return PolarPatch(center=(cx, cy), r_min=r_min, r_max=r_max,
                      data=sample_bilinear(img, x, y))


def from_polar(patch: PolarPatch, target) -> np.ndarray:
    """Write the polar patch back into a copy of target inside the annulus.

    Pixels outside the annulus are untouched. Sampling of the patch is
    bilinear, cyclic along the angular axis.
    """
    target = as_image(target)
    _check_annulus(target, patch.center, patch.r_min, patch.r_max)
    h, w = target.shape[:2]
    cx, cy = patch.center
    yy, xx = np.mgrid[0:h, 0:w]
    dx = xx - cx
    dy = yy - cy
    r = np.hypot(dx, dy)
    inside = (r >= patch.r_min) & (r <= patch.r_max)
    if not inside.any():
        return target.copy()

    nr, ntheta = patch.radial_samples, patch.angular_samples
    theta = np.mod(np.arctan2(dy[inside], dx[inside]), 2.0 * np.pi)
    u = (r[inside] - patch.r_min) / (patch.r_max - patch.r_min) * (nr - 1)
    v = theta / (2.0 * np.pi) * ntheta

    u0 = np.clip(np.floor(u).astype(np.intp), 0, nr - 1)
    u1 = np.minimum(u0 + 1, nr - 1)
    fu = (u - u0)[:, None]
    v0 = np.floor(v).astype(np.intp) % ntheta
    v1 = (v0 + 1) % ntheta
    fv = (v - np.floor(v))[:, None]

    d = patch.data
    top = d[u0, v0] * (1.0 - fv) + d[u0, v1] * fv
    bot = d[u1, v0] * (1.0 - fv) + d[u1, v1] * fv
    out = target.copy()
    out[inside] = top * (1.0 - fu) + bot * fu
    return out
