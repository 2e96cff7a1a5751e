"""White-box gradient-sign attack against a trained morph detector.

Trains a quick detector, then perturbs the detected morphs with FGSM at
growing pixel budgets and reports how many the detector still catches.
Epsilon is on the 0-255 intensity scale.
"""

import numpy as np

from morphforge.attack import MORPH, fgsm
from morphforge.dataset import build_regime, load_manifest, select_pairs
from morphforge.nn import build_network, train
from morphforge.pipeline import FaceStore, RenderOptions, render_sample
from morphforge.synthetic import write_database

import os

OUT = os.path.join(os.path.dirname(__file__), "output", "fgsm")
CROP = 32


def main():
    os.makedirs(OUT, exist_ok=True)
    manifest = write_database(os.path.join(OUT, "faces"), 24, seed=3)
    records = load_manifest(manifest)
    store = FaceStore(records, os.path.dirname(manifest))
    pairs = select_pairs(records, 12, seed=3)
    samples = build_regime(records, pairs, "naive", 48, seed=3)
    opts = RenderOptions(crop_size=CROP, expand=False)
    x = np.array([render_sample(s, store, opts)[0][0] for s in samples])
    y = np.array([(1 - s.label[0], s.label[0]) for s in samples], dtype=float)

    # FGSM clamps adversarial pixels to [0, 1], so train on raw pixels here
    net = build_network(input_size=CROP, seed=3)
    train(net, x, y, lr=0.01, epochs=25, batch=16, seed=3)

    morphs = x[y[:, 0] > 0.5]
    detected = net.predict(morphs).argmax(axis=1) == MORPH
    morphs = morphs[detected]
    print(f"{len(morphs)} morphs detected before the attack")

    for eps in (0, 1, 2, 4, 8, 16):
        adv = fgsm(net, morphs, MORPH, eps) if eps else morphs
        still = (net.predict(adv).argmax(axis=1) == MORPH).mean()
        budget = np.abs(adv - morphs).max() * 255.0
        print(f"eps {eps:2d}/255: {still:.2f} still detected "
              f"(actual max|delta| {budget:.2f}/255)")


if __name__ == "__main__":
    main()
