"""End-to-end rendering: sample lists to cropped, augmented training data.

Glue between the dataset bookkeeping and the imaging modules. Each sample
renders deterministically from (manifest, sample record); the per-sample
seed drives the crop shift and the corruption draws.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import errors
from .augment import CROP_SIZE, expand_five, normalize_crop
from .blend import compose_from_aligned
from .dataset import FaceRecord, SampleRecord
from .image import load_image, save_image
from .landmarks import LandmarkSet, parse_landmarks
from .regions import compose_partial, region_flags
from .warp import morph_align


@dataclass
class RenderOptions:
    alpha: float = 0.5
    outer_source: str = "A"
    sigma: float | None = None
    crop_size: int = CROP_SIZE
    shift_fraction: float = 0.05  # max |shift| as a fraction of crop size
    expand: bool = True           # five-version corruption expansion


class FaceStore:
    """Loads and caches (image, landmarks) per manifest record."""

    def __init__(self, records, base_dir):
        self.records = {r.id: r for r in records}
        self.base_dir = base_dir
        self._cache = {}

    def get(self, rid):
        if rid not in self._cache:
            rec = self.records[rid]
            img_path = rec.image if os.path.isabs(rec.image) \
                else os.path.join(self.base_dir, rec.image)
            lm_path = rec.landmarks if os.path.isabs(rec.landmarks) \
                else os.path.join(self.base_dir, rec.landmarks)
            img = load_image(img_path)
            lm = parse_landmarks(lm_path, (img.shape[1], img.shape[0]))
            self._cache[rid] = (img, lm)
        return self._cache[rid]


def render_base(sample: SampleRecord, store: FaceStore, opts: RenderOptions):
    """Render the uncropped sample image; returns (image, landmarks).

    Morph pairs are aligned once; partial morphs mix the complete morph
    with the warped first input (the genuine carrier).
    """
    if sample.kind == "genuine":
        return store.get(sample.sources[0])

    img_a, lm_a = store.get(sample.sources[0])
    img_b, lm_b = store.get(sample.sources[1])
    method = sample.method or "triangle"
    warped_a, warped_b, lm_t = morph_align(img_a, img_b, lm_a, lm_b, method)

    if sample.kind == "partial_morph" and not sample.regions:
        carrier = warped_a if opts.outer_source == "A" else warped_b
        return carrier, lm_t

    morph = compose_from_aligned(warped_a, warped_b, lm_t, alpha=opts.alpha,
                                 outer_source=opts.outer_source, sigma=opts.sigma)
    if sample.kind == "complete_morph":
        return morph, lm_t

    carrier = warped_a if opts.outer_source == "A" else warped_b
    return compose_partial(morph, carrier, lm_t, sample.regions), lm_t


def render_sample(sample: SampleRecord, store: FaceStore,
                  opts: RenderOptions = RenderOptions()):
    """Cropped (and optionally five-way corrupted) versions of one sample.

    Returns a list of (image, augment_kind) tuples at opts.crop_size.
    """
    img, lm = render_base(sample, store, opts)
    rng = np.random.default_rng(sample.seed)
    max_shift = opts.shift_fraction * opts.crop_size
    shift = tuple(rng.uniform(-max_shift, max_shift, size=2))
    crop = normalize_crop(img, lm, shift=shift, size=opts.crop_size)
    if not opts.expand:
        return [(crop, "none")]
    return [(version, spec.kind) for version, spec in expand_five(crop, rng)]


def render_dataset(samples, store: FaceStore, out_dir,
                   opts: RenderOptions = RenderOptions(), workers=1):
    """Render a sample list to PNGs plus an index file; returns index path."""
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    index_path = os.path.join(out_dir, "rendered.tsv")

    def job(args):
        i, sample = args
        rows = []
        for j, (img, aug_kind) in enumerate(render_sample(sample, store, opts)):
            name = f"s{i:05d}_{j}.png"
            save_image(img, os.path.join(img_dir, name))
            rows.append("\t".join([
                os.path.join("images", name), sample.kind,
                region_flags(sample.regions),
                ",".join(str(v) for v in sample.label),
                sample.regime, str(sample.seed), aug_kind,
            ]))
        return rows

    tasks = list(enumerate(samples))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_rows = list(pool.map(job, tasks))
    else:
        all_rows = [job(t) for t in tasks]

    with open(index_path, "w", encoding="utf-8") as f:
        f.write("path\tkind\tregions\tlabel\tregime\tseed\taugment\n")
        for rows in all_rows:
            f.write("\n".join(rows) + "\n")
    return index_path


@dataclass
class RenderedDataset:
    x: np.ndarray        # (N, S, S, C)
    labels: np.ndarray   # (N, n_label)
    kinds: list
    regions: list        # region flag strings

    def one_hot_binary(self):
        """(N, 2) one-hot with column 1 = genuine."""
        y = np.zeros((len(self.labels), 2))
        y[np.arange(len(self.labels)), self.labels[:, 0].astype(int)] = 1.0
        return y


def load_rendered(out_dir) -> RenderedDataset:
    """Load a rendered dataset directory back into arrays."""
    index_path = os.path.join(out_dir, "rendered.tsv")
    try:
        with open(index_path, "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    except FileNotFoundError as exc:
        raise errors.MissingFile(index_path) from exc
    imgs, labels, kinds, regions = [], [], [], []
    for line in lines[1:]:
        path, kind, reg, label, _, _, _ = line.split("\t")
        imgs.append(load_image(os.path.join(out_dir, path)))
        labels.append([int(v) for v in label.split(",")])
        kinds.append(kind)
        regions.append(reg)
    return RenderedDataset(x=np.array(imgs), labels=np.array(labels),
                           kinds=kinds, regions=regions)
