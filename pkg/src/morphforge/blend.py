"""Inner-face blending with a two-band transition zone.

The final morph keeps one warped original outside an elliptical zone and
the alpha blend inside it. Across the zone the low-frequency band is
blended by solving a Poisson equation and the high-frequency band by a
minimum-cost seam found with graph cut on an elliptic-polar grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import errors
from ._maxflow import FlowNetwork
from .image import Ellipse, as_image, sample_bilinear, split_frequency
from .landmarks import (LEFT_BROW, LEFT_EYE, LOWER_LIP_BOTTOM, RIGHT_BROW,
                        RIGHT_EYE, LandmarkSet)
from .warp import morph_align

INNER_MARGIN = 1.05
OUTER_FACTOR = 1.35
DEFAULT_POLAR_DIMS = (24, 64)


@dataclass(frozen=True)
class TransitionZone:
    """Annulus between two concentric ellipses, with its pixel mask."""

    inner: Ellipse
    outer: Ellipse
    mask: np.ndarray  # (H, W) bool, True strictly between the ellipses

    def __post_init__(self):
        if self.inner.center != self.outer.center:
            raise ValueError("transition ellipses must share their center")
        if self.inner.semi_axis_x >= self.outer.semi_axis_x or \
           self.inner.semi_axis_y >= self.outer.semi_axis_y:
            raise ValueError("inner ellipse must lie strictly inside the outer")


@dataclass
class SeamCut:
    """Per-angular-column radial switch index on the polar grid."""

    cut: np.ndarray   # (ntheta,) int; rows < cut come from inner, rest outer
    cost: float


def alpha_blend(a, b, alpha):
    """alpha*a + (1-alpha)*b, clamped to [0, 1]."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise errors.DimensionMismatch(f"{a.shape} vs {b.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return np.clip(alpha * a + (1.0 - alpha) * b, 0.0, 1.0)


def make_zone(inner: Ellipse, outer: Ellipse, dims) -> TransitionZone:
    """Build a TransitionZone with its annulus mask for a (W, H) image."""
    w, h = dims
    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy = inner.center
    q_in = ((xx - cx) / inner.semi_axis_x) ** 2 + ((yy - cy) / inner.semi_axis_y) ** 2
    q_out = ((xx - cx) / outer.semi_axis_x) ** 2 + ((yy - cy) / outer.semi_axis_y) ** 2
    mask = (q_in > 1.0) & (q_out < 1.0)
    return TransitionZone(inner=inner, outer=outer, mask=mask)


def transition_ellipses(lm: LandmarkSet, dims=None) -> TransitionZone:
    """Transition zone derived from facial landmarks.

    Center: midpoint of the eye-center midpoint and the mouth center.
    Inner semi-axes: 1.05 x half the outer-eye-corner distance (x) and
    1.05 x half the eyebrow-top-to-lower-lip distance (y); outer = 1.35 x.
    """
    pts = lm.points
    eye_mid = lm.eye_centers.mean(axis=0)
    mouth_center = pts[48:60].mean(axis=0)
    center = 0.5 * (eye_mid + mouth_center)

    eye_span = np.hypot(*(pts[RIGHT_EYE[0]] - pts[LEFT_EYE[3]]))
    brow_top = min(pts[RIGHT_BROW][:, 1].min(), pts[LEFT_BROW][:, 1].min())
    vert_span = pts[LOWER_LIP_BOTTOM, 1] - brow_top
    inner = Ellipse(tuple(center), INNER_MARGIN * eye_span / 2.0,
                    INNER_MARGIN * vert_span / 2.0)
    outer = inner.scaled(OUTER_FACTOR)
    if dims is None:
        dims = (lm.image_width, lm.image_height)
    return make_zone(inner, outer, dims)


def poisson_blend_low(low_inner, low_outer, zone: TransitionZone,
                      rms_tol=1e-8) -> np.ndarray:
    """Solve the low-band transition inside the annulus.

    Discrete Poisson equation with 4-neighbor Laplacian; guidance gradients
    come from low_inner; Dirichlet values are low_inner on/inside the inner
    ellipse and low_outer on/outside the outer ellipse.
    """
    low_inner = as_image(low_inner)
    low_outer = as_image(low_outer)
    if low_inner.shape != low_outer.shape:
        raise errors.DimensionMismatch(f"{low_inner.shape} vs {low_outer.shape}")
    h, w, c = low_inner.shape
    mask = zone.mask
    if not mask.any():
        raise errors.EmptyAnnulus("transition zone covers no pixel")

    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy = zone.inner.center
    inner_side = ((xx - cx) / zone.inner.semi_axis_x) ** 2 + \
                 ((yy - cy) / zone.inner.semi_axis_y) ** 2 <= 1.0

    out = np.where(inner_side[:, :, None], low_inner, low_outer)

    idx = -np.ones((h, w), dtype=np.intp)
    ys, xs = np.nonzero(mask)
    n = len(ys)
    idx[ys, xs] = np.arange(n)

    rows, cols, vals = [], [], []
    # boundary contribution per channel, filled below
    b_const = np.zeros((n, c))
    deg = np.zeros(n)
    neigh = ((0, 1), (0, -1), (1, 0), (-1, 0))
    for k in range(n):
        y, x = ys[k], xs[k]
        for dy, dx in neigh:
            ny, nx = y + dy, x + dx
            if not (0 <= ny < h and 0 <= nx < w):
                continue  # annulus pixels at the image border: drop the leg
            deg[k] += 1.0
            j = idx[ny, nx]
            if j >= 0:
                rows.append(k)
                cols.append(j)
                vals.append(-1.0)
            elif inner_side[ny, nx]:
                b_const[k] += low_inner[ny, nx]
            else:
                b_const[k] += low_outer[ny, nx]
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(deg)
    a_mat = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    # guidance: Laplacian of low_inner restricted to the same stencil
    guide = np.zeros((n, c))
    for k in range(n):
        y, x = ys[k], xs[k]
        acc = deg[k] * low_inner[y, x]
        for dy, dx in neigh:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w:
                acc = acc - low_inner[ny, nx]
        guide[k] = acc

    rhs = guide + b_const
    x0 = low_inner[ys, xs]
    atol = rms_tol * np.sqrt(n)
    for ch in range(c):
        sol, info = scipy.sparse.linalg.cg(a_mat, rhs[:, ch], x0=x0[:, ch],
                                           rtol=0.0, atol=atol, maxiter=10 * n)
        res = a_mat @ sol - rhs[:, ch]
        if info != 0 or np.sqrt(np.mean(res ** 2)) > rms_tol:
            raise errors.SolverDiverged(f"CG residual too large (info={info})")
        out[ys, xs, ch] = sol
    return out


def _ellipse_radius(ell: Ellipse, cos_t, sin_t):
    return 1.0 / np.sqrt((cos_t / ell.semi_axis_x) ** 2 + (sin_t / ell.semi_axis_y) ** 2)


def _polar_grid(zone: TransitionZone, nr, ntheta):
    """Sample positions of the elliptic-polar grid, shape (nr, ntheta) each."""
    thetas = np.arange(ntheta) * (2.0 * np.pi / ntheta)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    r_in = _ellipse_radius(zone.inner, cos_t, sin_t)
    r_out = _ellipse_radius(zone.outer, cos_t, sin_t)
    u = np.linspace(0.0, 1.0, nr)[:, None]
    r = r_in[None, :] + u * (r_out - r_in)[None, :]
    cx, cy = zone.inner.center
    return cx + r * cos_t[None, :], cy + r * sin_t[None, :]


def _gradient_cost(patch_inner, patch_outer):
    """Per-node cost: magnitude of the gradient difference of the two bands."""
    def grads(p):
        gr = np.gradient(p, axis=0)
        gt = (np.roll(p, -1, axis=1) - np.roll(p, 1, axis=1)) * 0.5  # cyclic
        return gr, gt

    gri, gti = grads(patch_inner)
    gro, gto = grads(patch_outer)
    d = np.sqrt((gri - gro) ** 2 + (gti - gto) ** 2)
    return d.sum(axis=2)  # sum over channels


def seam_cut_grid(cost: np.ndarray) -> SeamCut:
    """Min-cost cyclic seam on a (nr, ntheta) node-cost grid.

    Solved as min-cut/max-flow on the cylinder: source feeds the innermost
    ring, the sink drains the outermost; the edge cost between adjacent
    nodes p, q is cost[p] + cost[q].
    """
    nr, ntheta = cost.shape
    if nr < 2:
        raise errors.EmptyAnnulus("need at least two radial rings")
    if not np.isfinite(cost).all():
        raise errors.FlowOverflow("non-finite seam costs")

    def node(r, t):
        return r * ntheta + t

    net = FlowNetwork(nr * ntheta + 2)
    src = nr * ntheta
    snk = src + 1
    inf = float("inf")
    for t in range(ntheta):
        net.add_edge(src, node(0, t), inf)
        net.add_edge(node(nr - 1, t), snk, inf)
    for r in range(nr):
        for t in range(ntheta):
            if r + 1 < nr:
                c = cost[r, t] + cost[r + 1, t]
                net.add_edge(node(r, t), node(r + 1, t), c, c)
            tn = (t + 1) % ntheta
            c = cost[r, t] + cost[r, tn]
            net.add_edge(node(r, t), node(r, tn), c, c)

    flow = net.max_flow(src, snk)
    side = net.min_cut_side(src)

    cut = np.empty(ntheta, dtype=np.intp)
    for t in range(ntheta):
        r = 0
        while r < nr and side[node(r, t)]:
            r += 1
        cut[t] = max(r, 1)

    # recompute the cut cost from the partition; must equal the flow value
    cut_cost = 0.0
    for r in range(nr):
        for t in range(ntheta):
            if r + 1 < nr and side[node(r, t)] != side[node(r + 1, t)]:
                cut_cost += cost[r, t] + cost[r + 1, t]
            tn = (t + 1) % ntheta
            if side[node(r, t)] != side[node(r, tn)]:
                cut_cost += cost[r, t] + cost[r, tn]
    if not np.isclose(cut_cost, flow, rtol=1e-9, atol=1e-9):
        raise errors.FlowOverflow(
            f"min-cut cost {cut_cost} does not match max-flow value {flow}")
    return SeamCut(cut=cut, cost=float(flow))


def seam_cut_high(high_inner, high_outer, zone: TransitionZone,
                  polar_dims=DEFAULT_POLAR_DIMS) -> SeamCut:
    """Seam over the annulus deciding where the high band switches source."""
    high_inner = as_image(high_inner)
    high_outer = as_image(high_outer)
    if high_inner.shape != high_outer.shape:
        raise errors.DimensionMismatch(f"{high_inner.shape} vs {high_outer.shape}")
    if not zone.mask.any():
        raise errors.EmptyAnnulus("transition zone covers no pixel")
    nr, ntheta = polar_dims
    gx, gy = _polar_grid(zone, nr, ntheta)
    patch_in = sample_bilinear(high_inner, gx, gy)
    patch_out = sample_bilinear(high_outer, gx, gy)
    return seam_cut_grid(_gradient_cost(patch_in, patch_out))


def composite_high(high_inner, high_outer, zone: TransitionZone, seam: SeamCut,
                   polar_dims=DEFAULT_POLAR_DIMS):
    """Compose the high band: inner source inside the seam, outer outside."""
    high_inner = as_image(high_inner)
    high_outer = as_image(high_outer)
    h, w = high_inner.shape[:2]
    nr, ntheta = polar_dims
    cx, cy = zone.inner.center
    yy, xx = np.mgrid[0:h, 0:w]
    dx = xx - cx
    dy = yy - cy
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    r = np.hypot(dx, dy)
    r_in = _ellipse_radius(zone.inner, cos_t, sin_t)
    r_out = _ellipse_radius(zone.outer, cos_t, sin_t)
    u = (r - r_in) / (r_out - r_in)

    tcol = theta / (2.0 * np.pi) * ntheta
    t0 = np.floor(tcol).astype(np.intp) % ntheta
    t1 = (t0 + 1) % ntheta
    frac = tcol - np.floor(tcol)
    cut_u = ((seam.cut - 0.5) / (nr - 1))
    cut_here = cut_u[t0] * (1.0 - frac) + cut_u[t1] * frac

    from_inner = zone.inner.contains(xx, yy) | (zone.mask & (u < cut_here))
    return np.where(from_inner[:, :, None], high_inner, high_outer)


def compose_from_aligned(warped_a, warped_b, lm_t: LandmarkSet, alpha=0.5,
                         outer_source="A", sigma=None,
                         polar_dims=DEFAULT_POLAR_DIMS):
    """Blend two already-aligned images with the two-band transition."""
    blended = alpha_blend(warped_a, warped_b, alpha)
    outer_img = warped_a if outer_source == "A" else warped_b
    zone = transition_ellipses(lm_t)
    if sigma is None:
        sigma = max(0.01 * lm_t.interocular_distance, 0.5)

    low_in, high_in = split_frequency(blended, sigma)
    low_out, high_out = split_frequency(outer_img, sigma)
    low = poisson_blend_low(low_in, low_out, zone)
    seam = seam_cut_high(high_in, high_out, zone, polar_dims)
    high = composite_high(high_in, high_out, zone, seam, polar_dims)
    return np.clip(low + high, 0.0, 1.0)


def compose_morph(img_a, img_b, lm_a: LandmarkSet, lm_b: LandmarkSet,
                  method="triangle", alpha=0.5, outer_source="A",
                  sigma=None, polar_dims=DEFAULT_POLAR_DIMS):
    """Full morph pipeline: align, blend, and two-band transition.

    Returns the final image clamped to [0, 1]. sigma is the frequency-split
    Gaussian std; default 1% of the target inter-ocular distance.
    """
    warped_a, warped_b, lm_t = morph_align(img_a, img_b, lm_a, lm_b, method)
    return compose_from_aligned(warped_a, warped_b, lm_t, alpha=alpha,
                                outer_source=outer_source, sigma=sigma,
                                polar_dims=polar_dims)
