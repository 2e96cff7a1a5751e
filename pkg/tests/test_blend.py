import itertools

import numpy as np
import pytest

from morphforge import errors
from morphforge._maxflow import FlowNetwork
from morphforge.blend import (SeamCut, alpha_blend, compose_morph, make_zone,
                              poisson_blend_low, seam_cut_grid, seam_cut_high,
                              transition_ellipses)
from morphforge.image import Ellipse

from conftest import random_image


class TestAlphaBlend:
    def test_alpha_one(self, rng):
        a = random_image(rng, 5, 5)
        b = random_image(rng, 5, 5)
        assert np.array_equal(alpha_blend(a, b, 1.0), a)

    def test_half_constant(self):
        a = np.full((4, 4, 1), 0.2)
        b = np.full((4, 4, 1), 0.6)
        assert np.allclose(alpha_blend(a, b, 0.5), 0.4)

    def test_equal_inputs(self, rng):
        a = random_image(rng, 5, 5)
        assert np.allclose(alpha_blend(a, a, 0.5), a)

    def test_dimension_mismatch(self):
        with pytest.raises(errors.DimensionMismatch):
            alpha_blend(np.zeros((4, 4, 1)), np.zeros((5, 5, 1)), 0.5)


class TestTransitionEllipses:
    def test_translation_equivariance(self, face_a):
        from morphforge.landmarks import LandmarkSet
        lm = face_a.landmarks
        shifted = LandmarkSet(lm.points + (4.0, 6.0), 160, 160)
        z0 = transition_ellipses(lm, dims=(160, 160))
        z1 = transition_ellipses(shifted, dims=(160, 160))
        assert np.allclose(np.asarray(z1.inner.center) - z0.inner.center, (4, 6))
        assert z1.inner.semi_axis_x == pytest.approx(z0.inner.semi_axis_x)
        assert z1.outer.semi_axis_y == pytest.approx(z0.outer.semi_axis_y)

    def test_scale_equivariance(self, face_a):
        from morphforge.landmarks import LandmarkSet
        lm = face_a.landmarks
        scaled = LandmarkSet(lm.points * 2.0, 256, 256)
        z0 = transition_ellipses(lm)
        z1 = transition_ellipses(scaled, dims=(256, 256))
        assert z1.inner.semi_axis_x == pytest.approx(2 * z0.inner.semi_axis_x)
        assert z1.inner.semi_axis_y == pytest.approx(2 * z0.inner.semi_axis_y)

    def test_annulus_avoids_feature_interior(self, face_a):
        # the transition band must not cross the central features: nose,
        # eye centers and inner lip. The extreme eye/mouth corner points can
        # graze the annulus because the ellipse narrows off-axis.
        lm = face_a.landmarks
        zone = transition_ellipses(lm)
        feature_pts = np.vstack([lm.points[27:36], lm.points[60:68],
                                 lm.eye_centers])
        inside_inner = zone.inner.contains(feature_pts[:, 0], feature_pts[:, 1])
        assert inside_inner.all()


def dense_poisson_reference(low_inner, low_outer, zone):
    """Assemble the full linear system and solve it densely."""
    h, w, c = low_inner.shape
    mask = zone.mask
    ys, xs = np.nonzero(mask)
    n = len(ys)
    idx = -np.ones((h, w), dtype=int)
    idx[ys, xs] = np.arange(n)
    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy = zone.inner.center
    inner_side = ((xx - cx) / zone.inner.semi_axis_x) ** 2 + \
                 ((yy - cy) / zone.inner.semi_axis_y) ** 2 <= 1.0
    a = np.zeros((n, n))
    b = np.zeros((n, c))
    for k in range(n):
        y, x = ys[k], xs[k]
        acc = 0.0
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            ny, nx = y + dy, x + dx
            if not (0 <= ny < h and 0 <= nx < w):
                continue
            acc += 1.0
            j = idx[ny, nx]
            if j >= 0:
                a[k, j] -= 1.0
            elif inner_side[ny, nx]:
                b[k] += low_inner[ny, nx]
            else:
                b[k] += low_outer[ny, nx]
            b[k] += low_inner[y, x] - low_inner[ny, nx]  # guidance gradient
        a[k, k] = acc
    sol = np.linalg.solve(a, b)
    out = np.where(inner_side[:, :, None], low_inner, low_outer)
    out[ys, xs] = sol
    return out


class TestPoisson:
    def _small_zone(self, size=20):
        inner = Ellipse((size / 2, size / 2), size * 0.18, size * 0.22)
        outer = inner.scaled(1.8)
        return make_zone(inner, outer, (size, size))

    def test_consistent_input_identity(self, rng):
        img = random_image(rng, 20, 20)
        zone = self._small_zone()
        out = poisson_blend_low(img, img, zone)
        assert np.abs(out - img).max() < 1e-7

    def test_constant_boundary_zero_guidance(self):
        zone = self._small_zone()
        c = 0.37
        img = np.full((20, 20, 1), c)
        out = poisson_blend_low(img, img.copy(), zone)
        assert np.allclose(out, c, atol=1e-9)

    def test_matches_dense_solve(self, rng):
        zone = self._small_zone()
        a = random_image(rng, 20, 20)
        b = random_image(rng, 20, 20)
        out = poisson_blend_low(a, b, zone)
        ref = dense_poisson_reference(a, b, zone)
        diff = out[zone.mask] - ref[zone.mask]
        assert np.sqrt(np.mean(diff ** 2)) < 1e-8

    def test_boundary_exact(self, rng):
        zone = self._small_zone()
        a = random_image(rng, 20, 20)
        b = random_image(rng, 20, 20)
        out = poisson_blend_low(a, b, zone)
        yy, xx = np.mgrid[0:20, 0:20]
        cx, cy = zone.inner.center
        inner_side = zone.inner.contains(xx, yy)
        assert np.array_equal(out[inner_side & ~zone.mask], a[inner_side & ~zone.mask])
        outer_side = ~zone.outer.contains(xx, yy)
        assert np.array_equal(out[outer_side], b[outer_side])

    def test_maximum_principle_zero_guidance(self, rng):
        # constant guidance source: harmonic interior stays within the
        # boundary range
        zone = self._small_zone()
        a = np.full((20, 20, 1), 0.5)
        b = random_image(rng, 20, 20)
        out = poisson_blend_low(a, b, zone)
        lo = min(0.5, b.min()) - 1e-9
        hi = max(0.5, b.max()) + 1e-9
        vals = out[zone.mask]
        assert (vals >= lo).all() and (vals <= hi).all()

    def test_empty_annulus(self, rng):
        inner = Ellipse((10.0, 10.0), 3.0, 3.0)
        outer = inner.scaled(1.01)  # too thin to contain any pixel strictly
        zone = make_zone(inner, outer, (20, 20))
        with pytest.raises(errors.EmptyAnnulus):
            poisson_blend_low(random_image(rng, 20, 20),
                              random_image(rng, 20, 20), zone)


def brute_force_cyclic_cut(cost):
    """Minimum partition cost over all monotone-free cyclic cuts.

    Enumerates every assignment of a switch row per column (rows < cut come
    from the source side) and scores the induced partition exactly like the
    max-flow formulation: every edge between opposite sides contributes
    cost[p] + cost[q].
    """
    nr, ntheta = cost.shape
    best = np.inf
    for cuts in itertools.product(range(1, nr), repeat=ntheta):
        total = 0.0
        for t in range(ntheta):
            total += cost[cuts[t] - 1, t] + cost[cuts[t], t]
            tn = (t + 1) % ntheta
            lo, hi = sorted((cuts[t], cuts[tn]))
            for r in range(lo, hi):
                total += cost[r, t] + cost[r, tn]
        best = min(best, total)
    return best


class TestSeamCut:
    def test_zero_cost_identical_bands(self, rng):
        img = random_image(rng, 30, 30)
        inner = Ellipse((15.0, 15.0), 4.0, 5.0)
        zone = make_zone(inner, inner.scaled(1.9), (30, 30))
        seam = seam_cut_high(img, img.copy(), zone, polar_dims=(6, 12))
        assert seam.cost == pytest.approx(0.0, abs=1e-12)

    def test_forced_zero_ring(self):
        # costs differ on rings below k but ring k is free: the cheapest cut
        # runs along ring k with zero cost
        cost = np.ones((5, 8))
        cost[3, :] = 0.0
        cost[4, :] = 0.0
        seam = seam_cut_grid(cost)
        assert seam.cost == pytest.approx(0.0, abs=1e-12)
        assert (seam.cut == 4).all()

    def test_matches_brute_force_small(self, rng):
        for _ in range(50):
            nr = int(rng.integers(2, 4))
            ntheta = int(rng.integers(3, 9))
            cost = rng.uniform(0.0, 1.0, size=(nr, ntheta))
            seam = seam_cut_grid(cost)
            assert seam.cost == pytest.approx(brute_force_cyclic_cut(cost),
                                              rel=1e-9, abs=1e-9)

    def test_nonfinite_cost_rejected(self):
        cost = np.ones((3, 4))
        cost[1, 1] = np.nan
        with pytest.raises(errors.FlowOverflow):
            seam_cut_grid(cost)

    def test_single_ring_rejected(self):
        with pytest.raises(errors.EmptyAnnulus):
            seam_cut_grid(np.ones((1, 4)))


class TestMaxFlow:
    def test_simple_path(self):
        net = FlowNetwork(3)
        net.add_edge(0, 1, 2.5)
        net.add_edge(1, 2, 1.5)
        assert net.max_flow(0, 2) == pytest.approx(1.5)

    def test_parallel_paths(self):
        net = FlowNetwork(4)
        net.add_edge(0, 1, 1.0)
        net.add_edge(0, 2, 2.0)
        net.add_edge(1, 3, 3.0)
        net.add_edge(2, 3, 1.0)
        assert net.max_flow(0, 3) == pytest.approx(2.0)

    def test_min_cut_side(self):
        net = FlowNetwork(3)
        net.add_edge(0, 1, 1.0)
        net.add_edge(1, 2, 10.0)
        net.max_flow(0, 2)
        side = net.min_cut_side(0)
        assert side[0] and not side[1] and not side[2]


class TestComposeMorph:
    def test_identity_through_all_stages(self, face_a):
        out = compose_morph(face_a.image, face_a.image,
                            face_a.landmarks, face_a.landmarks, alpha=0.3)
        assert np.abs(out - face_a.image).max() < 1e-7

    def test_alpha_one_outer_a(self, face_a, face_b):
        out = compose_morph(face_a.image, face_b.image,
                            face_a.landmarks, face_a.landmarks,
                            alpha=1.0, outer_source="A")
        assert np.abs(out - face_a.image).max() < 1e-7

    def test_region_composition(self, face_a, face_b):
        from morphforge.blend import compose_from_aligned
        from morphforge.warp import morph_align
        wa, wb, lm_t = morph_align(face_a.image, face_b.image,
                                   face_a.landmarks, face_b.landmarks)
        out = compose_from_aligned(wa, wb, lm_t, alpha=0.5, outer_source="A")
        zone = transition_ellipses(lm_t)
        yy, xx = np.mgrid[0:128, 0:128]
        inner = zone.inner.contains(xx, yy)
        outer = ~zone.outer.contains(xx, yy)
        blend = alpha_blend(wa, wb, 0.5)
        assert np.abs(out - blend)[inner].max() < 1e-6
        assert np.abs(out - wa)[outer].max() < 1e-6

    def test_no_nans_and_shape(self, face_a, face_b):
        out = compose_morph(face_a.image, face_b.image,
                            face_a.landmarks, face_b.landmarks, method="field")
        assert out.shape == face_a.image.shape
        assert np.isfinite(out).all()
        assert out.min() >= 0.0 and out.max() <= 1.0
