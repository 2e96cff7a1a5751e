"""Forge-and-audit toolkit for face morphing attacks.

Generates complete and partial morphs from landmark-annotated face images,
builds training sets under four regimes, trains a small convolutional
classifier, and audits it with gradient-sign attacks, black-box substitute
attacks and layer-wise relevance propagation.
"""

from . import (attack, augment, blend, dataset, errors, image, landmarks,
               lrp, nn, pipeline, regions, synthetic, warp)

__all__ = ["attack", "augment", "blend", "dataset", "errors", "image",
           "landmarks", "lrp", "nn", "pipeline", "regions", "synthetic",
           "warp"]

__version__ = "0.1.0"
