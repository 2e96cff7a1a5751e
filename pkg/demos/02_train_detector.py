"""Train a morph detector end to end on a synthetic face database.

Writes a 24-face database, builds a naive-regime dataset (half genuine,
half complete morphs), renders it, trains the small CNN, and reports
TPR / TNR / EER on the training renders. Runs in well under a minute;
the point is the workflow, not the score.
"""

import os

import numpy as np

from morphforge.dataset import build_regime, load_manifest, select_pairs
from morphforge.nn import build_network, evaluate, train
from morphforge.pipeline import FaceStore, RenderOptions, render_sample
from morphforge.synthetic import write_database

OUT = os.path.join(os.path.dirname(__file__), "output", "detector")
CROP = 32


def main():
    os.makedirs(OUT, exist_ok=True)
    manifest = write_database(os.path.join(OUT, "faces"), 24, seed=0)
    records = load_manifest(manifest)
    store = FaceStore(records, os.path.dirname(manifest))

    pairs = select_pairs(records, 12, seed=1)
    samples = build_regime(records, pairs, "naive", 48, seed=1)
    opts = RenderOptions(crop_size=CROP, expand=False)
    x = np.array([render_sample(s, store, opts)[0][0] for s in samples])
    y = np.array([(1 - s.label[0], s.label[0]) for s in samples], dtype=float)
    print(f"rendered {len(x)} samples at {CROP}x{CROP}")

    net = build_network(input_size=CROP, seed=1)
    curve = train(net, x - 0.5, y, lr=0.01, epochs=25, batch=16, seed=1)
    print(f"final training loss {curve[-1]:.4f}")

    report = evaluate(net, x - 0.5, y)
    print(f"train-set TPR {report['tpr']:.3f}  TNR {report['tnr']:.3f}  "
          f"EER {report['eer']:.3f}")


if __name__ == "__main__":
    main()
