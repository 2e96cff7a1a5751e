"""68-point facial landmark ingestion and derived geometry.

Landmark files are plain text: one "x y" pair per line, 68 lines, "#"
comments and blank lines allowed. Point ordering follows the standard
68-point annotation:

    0-16  jaw contour          17-21 right eyebrow (image left)
    22-26 left eyebrow         27-30 nose bridge
    31-35 nose base            36-41 right eye (image left)
    42-47 left eye             48-59 outer lip
    60-67 inner lip

"Left"/"Right" below refer to image coordinates (left = smaller x),
not the subject's anatomical side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import errors

JAW = list(range(0, 17))
RIGHT_BROW = list(range(17, 22))  # image-left side
LEFT_BROW = list(range(22, 27))
NOSE_BRIDGE = list(range(27, 31))
NOSE_BASE = list(range(31, 36))
RIGHT_EYE = list(range(36, 42))  # image-left side
LEFT_EYE = list(range(42, 48))
OUTER_LIP = list(range(48, 60))
INNER_LIP = list(range(60, 68))

CHIN_TIP = 8
LOWER_LIP_BOTTOM = 57
INNER_LIP_TOP_CENTER = 62
INNER_LIP_BOTTOM_CENTER = 66
MOUTH_CORNER_LEFT = 48
MOUTH_CORNER_RIGHT = 54


@dataclass(frozen=True)
class LandmarkSet:
    """68 ordered (x, y) landmark positions plus the image dimensions."""

    points: np.ndarray  # (68, 2) float64
    image_width: int
    image_height: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.shape != (68, 2):
            raise errors.WrongPointCount(f"expected 68 points, got {pts.shape}")
        if (pts[:, 0] < 0).any() or (pts[:, 0] > self.image_width - 1).any() or \
           (pts[:, 1] < 0).any() or (pts[:, 1] > self.image_height - 1).any():
            raise errors.PointOutOfBounds("landmark outside image bounds")

    @property
    def eye_centers(self):
        """(left-in-image, right-in-image) eye centroids, shape (2, 2)."""
        a = self.points[RIGHT_EYE].mean(axis=0)
        b = self.points[LEFT_EYE].mean(axis=0)
        return np.array([a, b])

    @property
    def interocular_distance(self):
        a, b = self.eye_centers
        return float(np.hypot(*(a - b)))


@dataclass(frozen=True)
class ExtendedLandmarkSet:
    """Landmarks with the lip-center fusion applied and 15 extra points.

    points layout: 67 base points (index INNER_LIP_TOP_CENTER holds the
    fused lip center; the second center point is dropped) followed by
    8 border points, 2 eye centers, 2 cheek points, 1 mouth-chin midpoint
    and 2 forehead points.
    """

    base: LandmarkSet
    points: np.ndarray  # (82, 2)
    extra_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.shape != (82, 2):
            raise errors.WrongPointCount(f"expected 82 extended points, got {pts.shape}")


def parse_landmarks(path, image_dims) -> LandmarkSet:
    """Parse a 68-line landmark file; image_dims is (width, height)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except FileNotFoundError as exc:
        raise errors.MissingFile(str(path)) from exc
    pts = []
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise errors.ParseError(f"{path}:{lineno}: expected 'x y', got {text!r}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise errors.ParseError(f"{path}:{lineno}: non-numeric coordinate") from exc
    if len(pts) != 68:
        raise errors.WrongPointCount(f"{path}: expected 68 points, got {len(pts)}")
    w, h = image_dims
    return LandmarkSet(np.array(pts, dtype=np.float64), image_width=int(w), image_height=int(h))


def _fused_base_points(lm: LandmarkSet) -> np.ndarray:
    """67 points: the two inner-lip center points replaced by their midpoint."""
    pts = lm.points.copy()
    fused = 0.5 * (pts[INNER_LIP_TOP_CENTER] + pts[INNER_LIP_BOTTOM_CENTER])
    pts[INNER_LIP_TOP_CENTER] = fused
    return np.delete(pts, INNER_LIP_BOTTOM_CENTER, axis=0)


def extend_landmarks(lm: LandmarkSet) -> ExtendedLandmarkSet:
    """Add border, eye-center, cheek, mouth-chin and forehead points."""
    w, h = lm.image_width, lm.image_height
    xmax, ymax = w - 1.0, h - 1.0
    border = np.array([
        (0.0, 0.0), (xmax, 0.0), (0.0, ymax), (xmax, ymax),
        (xmax / 2.0, 0.0), (xmax / 2.0, ymax), (0.0, ymax / 2.0), (xmax, ymax / 2.0),
    ])
    eye_l, eye_r = lm.eye_centers

    # cheek: midpoint of the outer eye corner and the jaw point nearest to
    # mouth height, per side
    pts = lm.points
    mouth_y = 0.5 * (pts[MOUTH_CORNER_LEFT, 1] + pts[MOUTH_CORNER_RIGHT, 1])
    jaw = pts[JAW]
    left_jaw = jaw[:8]
    right_jaw = jaw[9:]
    jaw_l = left_jaw[np.argmin(np.abs(left_jaw[:, 1] - mouth_y))]
    jaw_r = right_jaw[np.argmin(np.abs(right_jaw[:, 1] - mouth_y))]
    cheek_l = 0.5 * (pts[RIGHT_EYE[0]] + jaw_l)   # outer corner of image-left eye
    cheek_r = 0.5 * (pts[LEFT_EYE[3]] + jaw_r)    # outer corner of image-right eye

    mouth_chin = 0.5 * (pts[LOWER_LIP_BOTTOM] + pts[CHIN_TIP])

    iod = lm.interocular_distance
    brow_top_l = pts[RIGHT_BROW][np.argmin(pts[RIGHT_BROW][:, 1])]
    brow_top_r = pts[LEFT_BROW][np.argmin(pts[LEFT_BROW][:, 1])]
    forehead_l = brow_top_l - np.array([0.0, 0.6 * iod])
    forehead_r = brow_top_r - np.array([0.0, 0.6 * iod])

    extras = np.vstack([border, eye_l, eye_r, cheek_l, cheek_r,
                        mouth_chin, forehead_l, forehead_r])
    extras[:, 0] = np.clip(extras[:, 0], 0.0, xmax)
    extras[:, 1] = np.clip(extras[:, 1], 0.0, ymax)
    names = ("corner_tl", "corner_tr", "corner_bl", "corner_br",
             "edge_top", "edge_bottom", "edge_left", "edge_right",
             "eye_center_l", "eye_center_r", "cheek_l", "cheek_r",
             "mouth_chin", "forehead_l", "forehead_r")
    points = np.vstack([_fused_base_points(lm), extras])
    return ExtendedLandmarkSet(base=lm, points=points, extra_names=names)


# fixed 55-segment line pattern: (point index list, closed?) per polyline
_PATTERN_POLYLINES = (
    (JAW, False),          # 16 segments
    (RIGHT_BROW, False),   # 4
    (LEFT_BROW, False),    # 4
    (RIGHT_EYE, True),     # 6
    (LEFT_EYE, True),      # 6
    (NOSE_BRIDGE, False),  # 3
    (NOSE_BASE, False),    # 4
    (OUTER_LIP, True),     # 12
)


def build_line_pattern(lm: LandmarkSet) -> np.ndarray:
    """Fixed 55-segment pattern as an (55, 2, 2) array of (start, end)."""
    pts = lm.points
    segs = []
    for indices, closed in _PATTERN_POLYLINES:
        idx = list(indices) + ([indices[0]] if closed else [])
        for a, b in zip(idx[:-1], idx[1:]):
            p, q = pts[a], pts[b]
            if np.hypot(*(q - p)) <= 0.0:
                raise errors.DegenerateSegment(f"points {a} and {b} coincide")
            segs.append((p, q))
    return np.array(segs, dtype=np.float64)


def average_landmarks(a, b):
    """Pointwise mean of two landmark arrays / sets of equal cardinality."""
    pa = a.points if hasattr(a, "points") else np.asarray(a, dtype=np.float64)
    pb = b.points if hasattr(b, "points") else np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise errors.CardinalityMismatch(f"{pa.shape} vs {pb.shape}")
    return 0.5 * (pa + pb)
