"""Audit a label-only morph detector with a substitute-model attack.

The oracle exposes only hard labels and counts every query. A substitute
network is trained on oracle labels with Jacobian dataset augmentation,
then morphs are perturbed on the substitute and replayed against the
oracle at growing pixel budgets. Prints the robustness curve and the
total query bill.
"""

import os

import numpy as np

from morphforge.attack import (blackbox_attack, oracle_from_network,
                               train_substitute)
from morphforge.dataset import build_regime, load_manifest, select_pairs
from morphforge.nn import build_network, train
from morphforge.pipeline import FaceStore, RenderOptions, render_sample
from morphforge.synthetic import write_database

OUT = os.path.join(os.path.dirname(__file__), "output", "blackbox")
CROP = 32


def main():
    os.makedirs(OUT, exist_ok=True)
    manifest = write_database(os.path.join(OUT, "faces"), 24, seed=5)
    records = load_manifest(manifest)
    store = FaceStore(records, os.path.dirname(manifest))
    pairs = select_pairs(records, 12, seed=5)
    samples = build_regime(records, pairs, "naive", 48, seed=5)
    opts = RenderOptions(crop_size=CROP, expand=False)
    x = np.array([render_sample(s, store, opts)[0][0] for s in samples])
    y = np.array([(1 - s.label[0], s.label[0]) for s in samples], dtype=float)

    # the defender's model; from here on it is a black box
    victim = build_network(input_size=CROP, seed=5)
    train(victim, x, y, lr=0.01, epochs=25, batch=16, seed=5)
    oracle = oracle_from_network(victim)

    # attacker's side: a small seed set and a weaker substitute
    seed_set = x[::6]
    substitute = build_network(input_size=CROP, conv_channels=(4, 4),
                               fc_width=32, seed=99)
    result = train_substitute(oracle, seed_set, rounds=3,
                              sub_net=substitute, seed=99)
    print(f"substitute agreement per round: "
          f"{[round(a, 3) for a in result.agreement]}")

    morphs = x[y[:, 0] > 0.5]
    curve = blackbox_attack(oracle, result.net, morphs,
                            epsilon_list=(0, 2, 4, 8, 16))
    for eps, frac in curve.points:
        print(f"eps {int(eps):2d}/255: {frac:.2f} of morphs still detected")
    curve.save(os.path.join(OUT, "robustness.tsv"))
    print(f"total oracle queries: {oracle.queries}")


if __name__ == "__main__":
    main()
