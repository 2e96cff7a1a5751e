import numpy as np
import pytest

from morphforge import errors
from morphforge.landmarks import LandmarkSet
from morphforge.regions import (REGION_LANDMARKS, RegionId, compose_partial,
                                parse_region_flags, region_flags, region_mask)

from conftest import random_image


class TestFlags:
    def test_round_trip(self):
        for rs in [frozenset(), frozenset({RegionId.NOSE}),
                   frozenset({RegionId.LEFT_EYE, RegionId.MOUTH}),
                   frozenset(RegionId)]:
            assert parse_region_flags(region_flags(rs)) == rs

    def test_known_encodings(self):
        assert region_flags(frozenset()) == "----"
        assert region_flags(frozenset(RegionId)) == "LRNM"
        assert region_flags({RegionId.NOSE}) == "--N-"

    def test_bad_flags(self):
        with pytest.raises(errors.ParseError):
            parse_region_flags("LL--")
        with pytest.raises(errors.ParseError):
            parse_region_flags("---")


class TestRegionMask:
    def test_landmarks_inside_own_mask(self, face_a):
        lm = face_a.landmarks
        for region in RegionId:
            mask = region_mask(region, lm).mask
            pts = lm.points[REGION_LANDMARKS[region]]
            xs = np.round(pts[:, 0]).astype(int)
            ys = np.round(pts[:, 1]).astype(int)
            assert (mask[ys, xs] == 1.0).all()

    def test_mouth_mask_zero_at_eyes(self, face_a):
        lm = face_a.landmarks
        mask = region_mask(RegionId.MOUTH, lm).mask
        for ex, ey in lm.eye_centers:
            assert mask[int(round(ey)), int(round(ex))] == 0.0

    def test_mostly_disjoint_at_half_weight(self, face_a):
        # the nose box necessarily grazes the eye boxes near the bridge, but
        # the strong parts of the masks must be overwhelmingly exclusive and
        # the mouth must not touch any other region
        lm = face_a.landmarks
        masks = {r: region_mask(r, lm).mask >= 0.5 for r in RegionId}
        mouth = masks[RegionId.MOUTH]
        for r in (RegionId.LEFT_EYE, RegionId.RIGHT_EYE, RegionId.NOSE):
            assert not (mouth & masks[r]).any()
        assert not (masks[RegionId.LEFT_EYE] & masks[RegionId.RIGHT_EYE]).any()
        nose = masks[RegionId.NOSE]
        eye_overlap = nose & (masks[RegionId.LEFT_EYE] | masks[RegionId.RIGHT_EYE])
        assert eye_overlap.sum() < 0.2 * nose.sum()

    def test_mirror_swaps_eye_masks(self, face_a):
        lm = face_a.landmarks
        w = lm.image_width
        mirrored_pts = lm.points.copy()
        mirrored_pts[:, 0] = (w - 1.0) - mirrored_pts[:, 0]
        # swap the eye/brow groups so the point layout stays valid
        order = list(range(68))
        order[36:42], order[42:48] = [45, 44, 43, 42, 47, 46], [39, 38, 37, 36, 41, 40]
        order[17:22], order[22:27] = [26, 25, 24, 23, 22], [21, 20, 19, 18, 17]
        mirrored = LandmarkSet(mirrored_pts[order], w, lm.image_height)
        left = region_mask(RegionId.LEFT_EYE, lm).mask
        right_m = region_mask(RegionId.RIGHT_EYE, mirrored).mask
        assert np.allclose(left, right_m[:, ::-1], atol=1e-9)


class TestComposePartial:
    def test_empty_set_returns_original(self, rng, face_a):
        morph = random_image(rng, 128, 128)
        orig = random_image(rng, 128, 128)
        out = compose_partial(morph, orig, face_a.landmarks, frozenset())
        assert np.array_equal(out, orig)

    def test_equal_inputs_any_set(self, rng, face_a):
        img = random_image(rng, 128, 128)
        for rs in [frozenset({RegionId.NOSE}), frozenset(RegionId)]:
            out = compose_partial(img, img.copy(), face_a.landmarks, rs)
            assert np.allclose(out, img, atol=1e-12)

    def test_nose_region_masked_comparison(self, rng, face_a):
        lm = face_a.landmarks
        morph = random_image(rng, 128, 128)
        orig = random_image(rng, 128, 128)
        out = compose_partial(morph, orig, lm, frozenset({RegionId.NOSE}))
        nose = region_mask(RegionId.NOSE, lm).mask
        assert np.array_equal(out[nose == 1.0], morph[nose == 1.0])
        union = np.clip(sum(region_mask(r, lm).mask for r in RegionId), 0, 1)
        assert np.array_equal(out[(union == 0.0) & (nose == 0.0)],
                              orig[(union == 0.0) & (nose == 0.0)])

    def test_monotone_region_addition(self, rng, face_a):
        lm = face_a.landmarks
        morph = random_image(rng, 128, 128)
        orig = random_image(rng, 128, 128)
        base = compose_partial(morph, orig, lm, frozenset({RegionId.NOSE}))
        more = compose_partial(morph, orig, lm,
                               frozenset({RegionId.NOSE, RegionId.MOUTH}))
        changed = np.abs(more - base).max(axis=2) > 0
        mouth_support = region_mask(RegionId.MOUTH, lm).mask > 0
        assert (~changed | mouth_support).all()

    def test_dimension_mismatch(self, face_a):
        with pytest.raises(errors.DimensionMismatch):
            compose_partial(np.zeros((10, 10, 1)), np.zeros((12, 12, 1)),
                            face_a.landmarks, frozenset())
