"""Image alignment backends: Delaunay triangle warp and field morphing.

Both warps are backward mappings: every output pixel looks up its source
position and samples the input bilinearly. Identity warps (source points
equal to destination points) reproduce the input bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.spatial

from . import errors
from .image import as_image, sample_bilinear
from .landmarks import LandmarkSet, average_landmarks, build_line_pattern, extend_landmarks

MIN_TRIANGLE_AREA = 1e-9


@dataclass(frozen=True)
class TriangleMesh:
    """Shared topology: vertex positions plus index triples."""

    vertices: np.ndarray   # (n, 2)
    triangles: np.ndarray  # (m, 3) int

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.intp))


@dataclass(frozen=True)
class FieldMorphParams:
    """Weight parameters: w = (1 / (d + epsilon))**2 with segment distance d."""

    epsilon: float = 0.5

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def _triangle_area(p0, p1, p2):
    return 0.5 * abs(
        (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
    )


def delaunay(points) -> TriangleMesh:
    """Delaunay triangulation of a 2-D point set."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise errors.TooFewPoints(f"need >= 3 points, got {pts.shape}")
    try:
        tri = scipy.spatial.Delaunay(pts)
    except scipy.spatial.QhullError as exc:
        raise errors.AllCollinear(str(exc)) from exc
    simplices = tri.simplices
    keep = [t for t in simplices
            if _triangle_area(pts[t[0]], pts[t[1]], pts[t[2]]) > MIN_TRIANGLE_AREA]
    if not keep:
        raise errors.AllCollinear("all triangles degenerate")
    return TriangleMesh(vertices=pts, triangles=np.array(keep, dtype=np.intp))


def affine_from_triangles(src, dst) -> np.ndarray:
    """2x3 affine matrix mapping the src triangle vertices onto dst exactly."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if _triangle_area(src[0], src[1], src[2]) <= MIN_TRIANGLE_AREA:
        raise errors.DegenerateSourceTriangle(f"source triangle {src.tolist()}")
    a = np.hstack([src, np.ones((3, 1))])  # rows: [x, y, 1]
    m = np.linalg.solve(a, dst)            # (3, 2)
    return m.T                             # (2, 3) acting on [x, y, 1]


def warp_triangle_mesh(img, src_pts, dst_pts, topology: TriangleMesh) -> np.ndarray:
    """Warp img so that src_pts land on dst_pts under a shared triangulation.

    Each output pixel inside a destination triangle samples the input at the
    inverse-affine position. Pixels claimed by several triangles go to the
    first triangle in topology order.
    """
    img = as_image(img)
    src_pts = np.asarray(src_pts, dtype=np.float64)
    dst_pts = np.asarray(dst_pts, dtype=np.float64)
    h, w = img.shape[:2]
    out = np.zeros_like(img)
    assigned = np.zeros((h, w), dtype=bool)
    eps = 1e-9

    for t in topology.triangles:
        d0, d1, d2 = dst_pts[t[0]], dst_pts[t[1]], dst_pts[t[2]]
        s_tri = src_pts[t]
        d_tri = dst_pts[t]
        x_lo = max(int(np.floor(min(d0[0], d1[0], d2[0]))), 0)
        x_hi = min(int(np.ceil(max(d0[0], d1[0], d2[0]))), w - 1)
        y_lo = max(int(np.floor(min(d0[1], d1[1], d2[1]))), 0)
        y_hi = min(int(np.ceil(max(d0[1], d1[1], d2[1]))), h - 1)
        if x_hi < x_lo or y_hi < y_lo:
            continue
        det = (d1[0] - d0[0]) * (d2[1] - d0[1]) - (d2[0] - d0[0]) * (d1[1] - d0[1])
        if abs(det) < 2.0 * MIN_TRIANGLE_AREA:
            continue
        yy, xx = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
        px = xx - d0[0]
        py = yy - d0[1]
        l1 = ((d2[1] - d0[1]) * px - (d2[0] - d0[0]) * py) / det
        l2 = (-(d1[1] - d0[1]) * px + (d1[0] - d0[0]) * py) / det
        inside = (l1 >= -eps) & (l2 >= -eps) & (l1 + l2 <= 1.0 + eps)
        inside &= ~assigned[y_lo:y_hi + 1, x_lo:x_hi + 1]
        if not inside.any():
            continue
        if np.array_equal(s_tri, d_tri):
            sx = xx[inside].astype(np.float64)
            sy = yy[inside].astype(np.float64)
        else:
            m = affine_from_triangles(d_tri, s_tri)  # dst -> src
            sx = m[0, 0] * xx[inside] + m[0, 1] * yy[inside] + m[0, 2]
            sy = m[1, 0] * xx[inside] + m[1, 1] * yy[inside] + m[1, 2]
        out[y_lo:y_hi + 1, x_lo:x_hi + 1][inside] = sample_bilinear(img, sx, sy)
        assigned[y_lo:y_hi + 1, x_lo:x_hi + 1][inside] = True

    if not assigned.all():
        n = int((~assigned).sum())
        raise errors.CoverageGap(f"{n} output pixels covered by no destination triangle")
    return out


def _field_displacement(px, py, pairs, params: FieldMorphParams):
    """Weighted mean displacement for points (px, py); arrays of equal shape.

    pairs is an (n, 2, 2, 2) array: pair, (src|dst), (start|end), (x|y).
    Returns (dx, dy). Displacements are exactly zero for pairs whose source
    and destination segments coincide.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.size == 0:
        raise errors.NoSegments("field morph needs at least one segment pair")
    shape = px.shape
    px = px.reshape(-1)[:, None]
    py = py.reshape(-1)[:, None]

    src_s = pairs[:, 0, 0]
    src_e = pairs[:, 0, 1]
    dst_s = pairs[:, 1, 0]
    dst_e = pairs[:, 1, 1]
    dvec = dst_e - dst_s
    svec = src_e - src_s
    dlen2 = (dvec ** 2).sum(axis=1)
    if (dlen2 <= 0).any() or ((svec ** 2).sum(axis=1) <= 0).any():
        raise errors.DegenerateSegment("zero-length segment in pair list")
    dlen = np.sqrt(dlen2)
    slen = np.sqrt((svec ** 2).sum(axis=1))
    # unit normals (perpendicular, consistent orientation in both images)
    dn = np.stack([dvec[:, 1], -dvec[:, 0]], axis=1) / dlen[:, None]
    sn = np.stack([svec[:, 1], -svec[:, 0]], axis=1) / slen[:, None]

    rx = px - dst_s[None, :, 0]
    ry = py - dst_s[None, :, 1]
    u = (rx * dvec[None, :, 0] + ry * dvec[None, :, 1]) / dlen2[None, :]
    v = (rx * dn[None, :, 0] + ry * dn[None, :, 1])

    # displacement form: zero when src and dst segments are identical
    disp_x = (src_s[None, :, 0] - dst_s[None, :, 0]) \
        + u * (svec[None, :, 0] - dvec[None, :, 0]) \
        + v * (sn[None, :, 0] - dn[None, :, 0])
    disp_y = (src_s[None, :, 1] - dst_s[None, :, 1]) \
        + u * (svec[None, :, 1] - dvec[None, :, 1]) \
        + v * (sn[None, :, 1] - dn[None, :, 1])

    # shortest distance to the destination *segment* (endpoint-clamped)
    uc = np.clip(u, 0.0, 1.0)
    cx = dst_s[None, :, 0] + uc * dvec[None, :, 0] - px
    cy = dst_s[None, :, 1] + uc * dvec[None, :, 1] - py
    d = np.sqrt(cx ** 2 + cy ** 2)
    wgt = (1.0 / (d + params.epsilon)) ** 2

    wsum = wgt.sum(axis=1)
    dx = (wgt * disp_x).sum(axis=1) / wsum
    dy = (wgt * disp_y).sum(axis=1) / wsum
    return dx.reshape(shape), dy.reshape(shape)


def make_pairs(src_segments, dst_segments) -> np.ndarray:
    """Stack matching (n,2,2) segment arrays into an (n,2,2,2) pair array."""
    src = np.asarray(src_segments, dtype=np.float64)
    dst = np.asarray(dst_segments, dtype=np.float64)
    if src.shape != dst.shape:
        raise errors.CardinalityMismatch(f"{src.shape} vs {dst.shape}")
    return np.stack([src, dst], axis=1)


def field_morph_point(p, pairs, params: FieldMorphParams = FieldMorphParams()):
    """Map one destination-image point to its source-image position."""
    p = np.asarray(p, dtype=np.float64)
    dx, dy = _field_displacement(np.array([p[0]]), np.array([p[1]]), pairs, params)
    return np.array([p[0] + dx[0], p[1] + dy[0]])


def warp_field(img, pairs, params: FieldMorphParams = FieldMorphParams()) -> np.ndarray:
    """Field-morph warp of the whole image (backward mapping per pixel)."""
    img = as_image(img)
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = _field_displacement(xx, yy, pairs, params)
    return sample_bilinear(img, xx + dx, yy + dy)


def morph_align(img_a, img_b, lm_a: LandmarkSet, lm_b: LandmarkSet, method="triangle",
                params: FieldMorphParams = FieldMorphParams()):
    """Warp both images onto the averaged landmark geometry.

    Returns (warped_a, warped_b, target_landmarks) where target_landmarks is
    a LandmarkSet holding the averaged 68-point geometry.
    """
    img_a = as_image(img_a)
    img_b = as_image(img_b)
    target = LandmarkSet(average_landmarks(lm_a, lm_b),
                         image_width=lm_a.image_width, image_height=lm_a.image_height)
    if method == "triangle":
        ext_a = extend_landmarks(lm_a).points
        ext_b = extend_landmarks(lm_b).points
        ext_t = average_landmarks(ext_a, ext_b)
        topology = delaunay(ext_t)
        warped_a = warp_triangle_mesh(img_a, ext_a, ext_t, topology)
        warped_b = warp_triangle_mesh(img_b, ext_b, ext_t, topology)
    elif method == "field":
        seg_a = build_line_pattern(lm_a)
        seg_b = build_line_pattern(lm_b)
        seg_t = 0.5 * (seg_a + seg_b)
        warped_a = warp_field(img_a, make_pairs(seg_a, seg_t), params)
        warped_b = warp_field(img_b, make_pairs(seg_b, seg_t), params)
    else:
        raise ValueError(f"unknown warp method {method!r}")
    return warped_a, warped_b, target
