import numpy as np
import pytest

from morphforge import errors
from morphforge.lrp import (LrpRuleAssignment, lrp_propagate, mean_adjust,
                            region_relevance)
from morphforge.nn import (Conv, Dense, Flatten, MaxPool, Network, ReLU,
                           build_network)

from conftest import random_image


class TestRuleAssignment:
    def test_alpha_beta_must_sum_to_one(self):
        with pytest.raises(ValueError):
            LrpRuleAssignment(alpha=2.0, beta=-0.5)

    def test_defaults(self):
        rules = LrpRuleAssignment()
        assert rules.alpha == 2.0 and rules.beta == -1.0


class TestDenseEpsilon:
    def test_identity_passthrough(self):
        # identity weights route each input's relevance straight through
        net = Network([Flatten(), Dense(4, 4), Dense(4, 4)])
        for layer in (net.layers[1], net.layers[2]):
            layer.w[...] = np.eye(4)
        x = np.array([0.3, 0.1, 0.4, 0.2]).reshape(2, 2, 1)
        rel = lrp_propagate(net, x, class_index=2, gate=None)
        # all relevance lands on the pixel feeding logit 2
        assert rel[1, 0] == pytest.approx(0.4, rel=1e-6)
        assert rel[0, 0] == pytest.approx(0.0, abs=1e-9)
        assert rel[0, 1] == pytest.approx(0.0, abs=1e-9)

    def test_proportional_split(self):
        # one logit fed by two equal positive contributions splits evenly
        net = Network([Flatten(), Dense(2, 2)])
        net.layers[1].w[...] = [[1.0, 0.0], [1.0, 0.0]]
        x = np.array([0.5, 0.5]).reshape(1, 2, 1)
        rel = lrp_propagate(net, x, class_index=0, gate=None)
        assert rel[0, 0] == pytest.approx(rel[0, 1], rel=1e-9)
        assert rel.sum() == pytest.approx(1.0, rel=1e-6)


class TestConservation:
    def _random_net(self, seed, size=8):
        rng = np.random.default_rng(seed)
        ch = int(rng.integers(2, 5))
        fc = int(rng.integers(6, 16))
        return build_network(input_size=size, conv_channels=(ch, ch),
                            fc_width=fc, seed=seed)

    def test_twenty_random_nets(self):
        # relevance reaching the input must equal the class logit within
        # 1e-6 relative, across random small networks and inputs
        rules = LrpRuleAssignment(epsilon=1e-9)
        for seed in range(20):
            net = self._random_net(seed)
            rng = np.random.default_rng(1000 + seed)
            x = rng.uniform(0.05, 1.0, size=(8, 8, 1))
            logits = net.forward(x[None])[0]
            cls = int(np.argmax(logits))
            # the stabilizer leaks a fixed absolute amount per layer, so a
            # relative bound needs a logit comfortably above that leakage
            if logits[cls] <= 1e-2:
                continue
            rel = lrp_propagate(net, x, cls, rules=rules, gate=None)
            assert abs(rel.sum() - logits[cls]) <= 1e-6 * abs(logits[cls])

    def test_flat_rule_conserves(self):
        # flat redistribution over receptive fields is conservative by
        # construction, including at image borders
        net = Network([Conv(3, 1, 2, rng=np.random.default_rng(1)), ReLU(),
                       MaxPool(), Flatten(),
                       Dense(2 * 2 * 2, 2, rng=np.random.default_rng(2))])
        x = np.random.default_rng(3).uniform(0.1, 1.0, size=(4, 4, 1))
        logits = net.forward(x[None])[0]
        cls = int(np.argmax(np.abs(logits)))
        rel = lrp_propagate(net, x, cls, gate=None)
        assert rel.sum() == pytest.approx(logits[cls], rel=1e-6)


class TestAlphaBeta:
    def test_positive_only_reduces_to_proportional(self):
        # with nonnegative weights and inputs the negative contributions
        # vanish; the beta share folds into the positive side and the rule
        # becomes plain proportional decomposition, still conservative
        rng = np.random.default_rng(4)
        conv = Conv(3, 1, 2, rng=rng)
        conv.w[...] = np.abs(conv.w)
        net = Network([conv, ReLU(), MaxPool(), Flatten(),
                       Dense(2 * 2 * 2, 2, rng=np.random.default_rng(5))])
        x = np.random.default_rng(6).uniform(0.1, 1.0, size=(4, 4, 1))
        logits = net.forward(x[None])[0]
        cls = int(np.argmax(logits))
        # force the conv out of the flat zone so alpha-beta applies
        rules = LrpRuleAssignment(first_block_end=0)
        rel = lrp_propagate(net, x, cls, rules=rules, gate=None)
        assert rel.sum() == pytest.approx(logits[cls], rel=1e-6)


class TestGate:
    def test_below_gate_raises(self):
        net = Network([Flatten(), Dense(4, 2)])
        net.layers[1].w[...] = [[10.0, -10.0]] * 4
        x = np.full((2, 2, 1), 1.0)  # strongly class 0
        with pytest.raises(errors.BelowGate):
            lrp_propagate(net, x, class_index=1, gate=0.1)

    def test_gate_none_disables(self):
        net = Network([Flatten(), Dense(4, 2)])
        net.layers[1].w[...] = [[10.0, -10.0]] * 4
        x = np.full((2, 2, 1), 1.0)
        rel = lrp_propagate(net, x, class_index=1, gate=None)
        assert np.isfinite(rel).all()


class TestMeanAdjust:
    def test_singleton_all_zero(self, rng):
        m = rng.uniform(size=(5, 5))
        out = mean_adjust([m])
        assert np.array_equal(out[0], np.zeros((5, 5)))

    def test_two_maps_algebra(self):
        a = np.array([[1.0, 0.0], [3.0, 2.0]])
        b = np.array([[0.0, 2.0], [1.0, 2.0]])
        out = mean_adjust([a, b])
        # each map keeps max(x - mean, 0) = max((x - other)/2, 0)
        assert np.allclose(out[0], np.maximum((a - b) / 2.0, 0.0))
        assert np.allclose(out[1], np.maximum((b - a) / 2.0, 0.0))

    def test_empty_list(self):
        with pytest.raises(errors.EmptyList):
            mean_adjust([])

    def test_shape_mismatch(self):
        with pytest.raises(errors.ShapeMismatch):
            mean_adjust([np.zeros((2, 2)), np.zeros((3, 3))])


class TestRegionRelevance:
    def test_nose_concentrated(self, face_a):
        from morphforge.regions import RegionId, region_mask
        lm = face_a.landmarks
        m = np.zeros((128, 128))
        nose = region_mask(RegionId.NOSE, lm).mask >= 1.0
        m[nose] = 1.0
        fracs = region_relevance(m, lm)
        assert fracs[RegionId.NOSE] == pytest.approx(1.0)
        assert fracs[RegionId.MOUTH] == pytest.approx(0.0)

    def test_fractions_sum_to_one(self, face_a):
        rng = np.random.default_rng(2)
        m = rng.uniform(size=(128, 128))
        fracs = region_relevance(m, face_a.landmarks)
        assert sum(fracs.values()) == pytest.approx(1.0)

    def test_uniform_map_weights_by_area(self, face_a):
        from morphforge.regions import RegionId, region_mask
        lm = face_a.landmarks
        fracs = region_relevance(np.ones((128, 128)), lm)
        areas = {r: (region_mask(r, lm).mask >= 1.0).sum() for r in RegionId}
        total = sum(areas.values())
        for r in RegionId:
            assert fracs[r] == pytest.approx(areas[r] / total)

    def test_zero_relevance(self, face_a):
        with pytest.raises(errors.ZeroRegionRelevance):
            region_relevance(np.zeros((128, 128)), face_a.landmarks)


def test_batch_and_single_agree():
    net = build_network(input_size=8, conv_channels=(3,), fc_width=8, seed=9)
    rng = np.random.default_rng(10)
    batch = rng.uniform(0.1, 1.0, size=(3, 8, 8, 1))
    single = [lrp_propagate(net, img, 0, gate=None) for img in batch]
    stacked = lrp_propagate(net, batch, 0, gate=None)
    assert np.allclose(stacked, np.stack(single), atol=1e-12)
