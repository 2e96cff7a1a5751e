"""Explain a morph detection with layer-wise relevance propagation.

Trains a quick detector, picks a detected morph, propagates the morph
logit back to the pixels, and prints how the relevance splits across the
four facial regions. The heatmap is saved as a PNG.
"""

import os

import numpy as np

from morphforge.dataset import build_regime, load_manifest, select_pairs
from morphforge.image import save_image
from morphforge.augment import crop_landmarks
from morphforge.lrp import lrp_propagate, region_relevance
from morphforge.nn import build_network, train
from morphforge.pipeline import FaceStore, RenderOptions, render_base, render_sample
from morphforge.regions import RegionId
from morphforge.synthetic import write_database

OUT = os.path.join(os.path.dirname(__file__), "output", "lrp")
CROP = 32


def main():
    os.makedirs(OUT, exist_ok=True)
    manifest = write_database(os.path.join(OUT, "faces"), 24, seed=7)
    records = load_manifest(manifest)
    store = FaceStore(records, os.path.dirname(manifest))
    pairs = select_pairs(records, 12, seed=7)
    samples = build_regime(records, pairs, "naive", 48, seed=7)
    # zero crop shift so crop_landmarks maps straight into crop space
    opts = RenderOptions(crop_size=CROP, expand=False, shift_fraction=0.0)

    rendered = []
    for s in samples:
        img, lm = render_base(s, store, opts)
        crop = render_sample(s, store, opts)[0][0]
        rendered.append((s, crop, lm))
    x = np.array([r[1] for r in rendered])
    y = np.array([(1 - s.label[0], s.label[0])
                  for s, _, _ in rendered], dtype=float)

    net = build_network(input_size=CROP, seed=7)
    train(net, x, y, lr=0.01, epochs=25, batch=16, seed=7)

    # first morph the detector actually flags
    for s, crop, lm in rendered:
        if s.label[0] == 0 and net.predict(crop[None]).argmax() == 0:
            break
    else:
        raise SystemExit("no morph detected; rerun with another seed")

    rel = lrp_propagate(net, crop, class_index=0, gate=None)
    rel = np.maximum(rel, 0.0)
    heat = rel / rel.max() if rel.max() > 0 else rel
    save_image(heat[:, :, None], os.path.join(OUT, "heatmap.png"))
    save_image(crop, os.path.join(OUT, "input.png"))

    # landmark coordinates in crop space for the region split
    lm_crop = crop_landmarks(lm, size=CROP)
    fracs = region_relevance(rel, lm_crop)
    print(f"detected morph from pair {s.sources}")
    for region in RegionId:
        print(f"  {region.name:10s} {fracs[region]:.3f}")
    print(f"heatmap in {OUT}")


if __name__ == "__main__":
    main()
