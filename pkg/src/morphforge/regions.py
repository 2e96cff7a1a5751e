"""Facial regions and partial-morph composition.

Four regions (left eye, right eye, nose, mouth) are placed relative to the
landmarks; eye regions include the eyebrows. A partial morph takes the
selected regions from the complete morph and everything else from an
aligned original, with feathered region borders.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import errors
from .image import as_image
from .landmarks import (LEFT_BROW, LEFT_EYE, NOSE_BASE, NOSE_BRIDGE,
                        OUTER_LIP, RIGHT_BROW, RIGHT_EYE, LandmarkSet)

EXPAND_FRACTION = 0.15   # rectangle expansion, fraction of its diagonal
FEATHER_FRACTION = 0.03  # feather band width, fraction of image height


class RegionId(Enum):
    LEFT_EYE = "L"
    RIGHT_EYE = "R"
    NOSE = "N"
    MOUTH = "M"


REGION_LANDMARKS = {
    RegionId.LEFT_EYE: RIGHT_EYE + RIGHT_BROW,   # image-left side
    RegionId.RIGHT_EYE: LEFT_EYE + LEFT_BROW,
    RegionId.NOSE: NOSE_BRIDGE + NOSE_BASE,
    RegionId.MOUTH: OUTER_LIP,
}


@dataclass(frozen=True)
class RegionMask:
    region: RegionId
    mask: np.ndarray  # (H, W) float in [0, 1]


def region_flags(regions) -> str:
    """Encode a region set as the fixed-order 4-character flag string."""
    regions = set(regions)
    return "".join(r.value if r in regions else "-" for r in RegionId)


def parse_region_flags(flags) -> frozenset:
    if len(flags) != 4:
        raise errors.ParseError(f"region flags must have 4 characters: {flags!r}")
    out = set()
    for ch, rid in zip(flags, RegionId):
        if ch == rid.value:
            out.add(rid)
        elif ch != "-":
            raise errors.ParseError(f"bad region flag {ch!r} in {flags!r}")
    return frozenset(out)


def _region_boxes(lm: LandmarkSet):
    """Padded landmark rectangles, pulled apart where the padding collides.

    Each rectangle grows by a fraction of its diagonal.  When two padded
    rectangles overlap even though the landmark extents themselves do not,
    both are clipped to the midline of the landmark gap along the axis with
    the widest gap, so padding never swallows a neighbouring region.
    """
    raw = {}
    padded = {}
    for region in RegionId:
        pts = lm.points[REGION_LANDMARKS[region]]
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        pad = EXPAND_FRACTION * np.hypot(*(hi - lo))
        raw[region] = (lo, hi)
        padded[region] = [lo - pad, hi + pad]
    # the half-weight contour of the feather sits this far outside the box
    margin = 0.5 * FEATHER_FRACTION * lm.image_height
    regions = list(RegionId)
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            alo, ahi = padded[a]
            blo, bhi = padded[b]
            if (ahi + margin < blo - margin).any() or \
               (bhi + margin < alo - margin).any():
                continue
            ra, rb = raw[a], raw[b]
            gaps = np.maximum(rb[0] - ra[1], ra[0] - rb[1])
            axis = int(np.argmax(gaps))
            if gaps[axis] <= 0.0:
                continue  # landmark extents themselves overlap; leave as is
            # never clip past the rounded landmark pixel of the extent
            if ra[1][axis] <= rb[0][axis]:
                mid = 0.5 * (ra[1][axis] + rb[0][axis])
                ahi[axis] = min(ahi[axis], max(mid - margin, np.round(ra[1][axis])))
                blo[axis] = max(blo[axis], min(mid + margin, np.round(rb[0][axis])))
            else:
                mid = 0.5 * (rb[1][axis] + ra[0][axis])
                bhi[axis] = min(bhi[axis], max(mid - margin, np.round(rb[1][axis])))
                alo[axis] = max(alo[axis], min(mid + margin, np.round(ra[0][axis])))
    return padded


def region_mask(region: RegionId, lm: LandmarkSet, dims=None) -> RegionMask:
    """Feathered rounded-rectangle mask around the region's landmarks."""
    if dims is None:
        dims = (lm.image_width, lm.image_height)
    w, h = dims
    (x_lo, y_lo), (x_hi, y_hi) = _region_boxes(lm)[region]

    feather = max(FEATHER_FRACTION * h, 1e-6)
    yy, xx = np.mgrid[0:h, 0:w]
    # signed distance outside the rectangle (0 inside)
    dx = np.maximum(np.maximum(x_lo - xx, xx - x_hi), 0.0)
    dy = np.maximum(np.maximum(y_lo - yy, yy - y_hi), 0.0)
    dist = np.hypot(dx, dy)
    mask = np.clip(1.0 - dist / feather, 0.0, 1.0)
    return RegionMask(region=region, mask=mask)


def compose_partial(morph, aligned_original, lm_target: LandmarkSet,
                    morphed_regions) -> np.ndarray:
    """Mix morphed regions into the aligned original (feather-weighted)."""
    morph = as_image(morph)
    aligned_original = as_image(aligned_original)
    if morph.shape != aligned_original.shape:
        raise errors.DimensionMismatch(f"{morph.shape} vs {aligned_original.shape}")
    h, w = morph.shape[:2]
    weight = np.zeros((h, w))
    for region in morphed_regions:
        weight += region_mask(region, lm_target, (w, h)).mask
    weight = np.clip(weight, 0.0, 1.0)[:, :, None]
    return weight * morph + (1.0 - weight) * aligned_original
