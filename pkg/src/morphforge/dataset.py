"""Manifests, splits, morph-pair selection and training-regime sample lists.

The face manifest is a UTF-8 tab-separated table with a header row and the
columns id, image, landmarks, gender, database and (optionally) split.
Sample lists are line-delimited tab-separated records carrying everything
needed to re-render a sample bit-exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .regions import RegionId, parse_region_flags, region_flags

SPLITS = ("train", "test", "val")
DEFAULT_RATIOS = (0.80, 0.15, 0.05)
WARP_METHODS = ("triangle", "field")
REGIMES = ("naive", "one_region", "complex", "multiclass")


@dataclass(frozen=True)
class FaceRecord:
    id: str
    image: str
    landmarks: str
    gender: str
    database: str
    split: str | None = None


@dataclass(frozen=True)
class MorphPair:
    a: FaceRecord
    b: FaceRecord
    method: str  # triangle | field


@dataclass(frozen=True)
class SampleRecord:
    """One labeled training sample before rendering."""

    kind: str                       # genuine | complete_morph | partial_morph
    sources: tuple                  # 1 or 2 record ids
    regions: frozenset = frozenset()
    method: str | None = None       # warp method for morph kinds
    label: tuple = ()               # (binary,) or 4-bit region vector
    regime: str = ""
    seed: int = 0                   # per-sample seed for augmentation/shift

    def __post_init__(self):
        if self.kind == "genuine" and (len(self.sources) != 1 or self.regions):
            raise ValueError("genuine samples have one source and no regions")
        if self.kind == "complete_morph" and len(self.sources) != 2:
            raise ValueError("complete morphs have two sources")
        if self.kind == "partial_morph" and len(self.sources) != 2:
            raise ValueError("partial morphs have two sources")

    @property
    def is_attack(self) -> bool:
        return self.kind == "complete_morph" or (
            self.kind == "partial_morph" and bool(self.regions))


def load_manifest(path) -> list[FaceRecord]:
    """Parse and validate a face manifest file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f]
    except FileNotFoundError as exc:
        raise errors.MissingFile(str(path)) from exc
    lines = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not lines:
        return []
    header = lines[0].split("\t")
    required = ["id", "image", "landmarks", "gender", "database"]
    for col in required:
        if col not in header:
            raise errors.ParseError(f"{path}: missing column {col!r}")
    col = {name: header.index(name) for name in header}
    base = os.path.dirname(os.path.abspath(path))
    records = []
    seen = set()
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise errors.ParseError(f"{path}:{lineno}: expected {len(header)} fields")
        rid = parts[col["id"]]
        if rid in seen:
            raise errors.DuplicateId(f"{path}:{lineno}: duplicate id {rid!r}")
        seen.add(rid)
        split = parts[col["split"]] if "split" in col and parts[col["split"]] else None
        if split is not None and split not in SPLITS:
            raise errors.ParseError(f"{path}:{lineno}: bad split {split!r}")
        image = parts[col["image"]]
        lmk = parts[col["landmarks"]]
        for p in (image, lmk):
            full = p if os.path.isabs(p) else os.path.join(base, p)
            if not os.path.isfile(full):
                raise errors.MissingFile(f"{path}:{lineno}: {p}")
        records.append(FaceRecord(id=rid, image=image, landmarks=lmk,
                                  gender=parts[col["gender"]],
                                  database=parts[col["database"]], split=split))
    return records


def _largest_remainder(total, fractions):
    """Integer bucket counts summing to total, largest-remainder rounding."""
    raw = np.asarray(fractions, dtype=np.float64) * total
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    for i in order[: total - counts.sum()]:
        counts[i] += 1
    return counts


def split_dataset(records, ratios=DEFAULT_RATIOS, seed=0) -> list[FaceRecord]:
    """Assign train/test/val per database, stratified, deterministic."""
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise errors.BadRatios(f"ratios must be 3 nonnegative values summing to 1: {ratios}")
    rng = np.random.default_rng(seed)
    by_db: dict[str, list[FaceRecord]] = {}
    for rec in records:
        by_db.setdefault(rec.database, []).append(rec)
    out = {}
    for db in sorted(by_db):
        group = sorted(by_db[db], key=lambda r: r.id)
        perm = rng.permutation(len(group))
        counts = _largest_remainder(len(group), ratios)
        cursor = 0
        for split, cnt in zip(SPLITS, counts):
            for k in perm[cursor:cursor + cnt]:
                out[group[k].id] = replace(group[k], split=split)
            cursor += cnt
    return [out[r.id] for r in records]


def select_pairs(records, count, seed=0) -> list[MorphPair]:
    """Pick morph pairs under the selection guidelines.

    Pairs are same-gender, same-database, same-split; per-image usage is
    balanced within each stratum; methods alternate triangle/field.
    """
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    strata: dict[tuple, list[FaceRecord]] = {}
    for rec in records:
        strata.setdefault((rec.split, rec.database, rec.gender), []).append(rec)
    feasible = {k: sorted(v, key=lambda r: r.id)
                for k, v in strata.items() if len(v) >= 2}
    if not feasible:
        raise errors.InfeasibleConstraints("no stratum with >= 2 records")

    keys = sorted(feasible, key=lambda k: (str(k[0]), k[1], k[2]))
    sizes = np.array([len(feasible[k]) for k in keys], dtype=np.float64)
    alloc = _largest_remainder(count, sizes / sizes.sum())

    pairs = []
    for key, n_pairs in zip(keys, alloc):
        group = list(feasible[key])
        rng.shuffle(group)
        usage = {r.id: 0 for r in group}
        for _ in range(n_pairs):
            ranked = sorted(group, key=lambda r: (usage[r.id], r.id))
            a, b = ranked[0], ranked[1]
            usage[a.id] += 1
            usage[b.id] += 1
            pairs.append((a, b))
    order = rng.permutation(len(pairs))
    return [MorphPair(a=pairs[k][0], b=pairs[k][1],
                      method=WARP_METHODS[i % 2])
            for i, k in enumerate(order)]


# balanced region-combination schedules; the k=3 cycle is the elementwise
# complement of the k=1 cycle so their incidences sum evenly
_R = list(RegionId)
_SCHEDULES = {
    1: [frozenset({r}) for r in _R],
    2: [frozenset({_R[0], _R[1]}), frozenset({_R[2], _R[3]}),
        frozenset({_R[0], _R[2]}), frozenset({_R[1], _R[3]}),
        frozenset({_R[0], _R[3]}), frozenset({_R[1], _R[2]})],
    3: [frozenset(_R) - frozenset({r}) for r in _R],
    4: [frozenset(_R)],
}

_REGIME_BUCKETS = {
    # regime -> list of (kind, region-count or None, fraction)
    "naive": [("genuine", None, 0.5), ("complete_morph", None, 0.5)],
    "one_region": [("genuine", None, 0.5), ("complete_morph", None, 0.1),
                   ("partial_morph", 1, 0.4)],
    "complex": [("genuine", None, 0.5), ("complete_morph", None, 0.1),
                ("partial_morph", 1, 0.1), ("partial_morph", 2, 0.1),
                ("partial_morph", 3, 0.1), ("partial_morph", 4, 0.1)],
    "multiclass": [("partial_morph", 0, 0.2), ("partial_morph", 1, 0.2),
                   ("partial_morph", 2, 0.2), ("partial_morph", 3, 0.2),
                   ("partial_morph", 4, 0.2)],
}


def _label_for(regime, kind, regions):
    if regime == "multiclass":
        return tuple(1 if r in regions else 0 for r in RegionId)
    attack = kind == "complete_morph" or (kind == "partial_morph" and regions)
    return (0 if attack else 1,)  # positives are genuine images


def build_regime(records, pairs, regime, total, seed=0) -> list[SampleRecord]:
    """Sample list with the regime's exact composition (±1 rounding)."""
    if regime not in _REGIME_BUCKETS:
        raise ValueError(f"unknown regime {regime!r}")
    buckets = _REGIME_BUCKETS[regime]
    counts = _largest_remainder(total, [f for _, _, f in buckets])
    morphs_needed = sum(c for (kind, _, _), c in zip(buckets, counts)
                        if kind != "genuine")
    if morphs_needed > 0 and not pairs:
        raise errors.InsufficientPairs("regime needs morph pairs but none given")
    genuines_needed = sum(c for (kind, _, _), c in zip(buckets, counts)
                          if kind == "genuine")
    if genuines_needed > 0 and not records:
        raise errors.InsufficientPairs("regime needs genuine records but none given")

    rng = np.random.default_rng(seed)
    recs = sorted(records, key=lambda r: r.id)
    if recs:
        rec_order = [recs[i] for i in rng.permutation(len(recs))]
    pair_order = [pairs[i] for i in rng.permutation(len(pairs))] if pairs else []
    rec_cursor = 0
    pair_cursor = 0
    samples = []
    for (kind, n_regions, _), cnt in zip(buckets, counts):
        if n_regions in _SCHEDULES:
            schedule = _SCHEDULES[n_regions]
        elif kind == "partial_morph":  # zero regions
            schedule = [frozenset()]
        else:
            schedule = None
        for i in range(cnt):
            sample_seed = int(rng.integers(0, 2 ** 31))
            if kind == "genuine":
                rec = rec_order[rec_cursor % len(rec_order)]
                rec_cursor += 1
                samples.append(SampleRecord(
                    kind=kind, sources=(rec.id,), regime=regime,
                    label=_label_for(regime, kind, frozenset()), seed=sample_seed))
            else:
                pair = pair_order[pair_cursor % len(pair_order)]
                pair_cursor += 1
                regions = schedule[i % len(schedule)] if schedule else frozenset()
                samples.append(SampleRecord(
                    kind=kind, sources=(pair.a.id, pair.b.id), regions=regions,
                    method=pair.method, regime=regime,
                    label=_label_for(regime, kind, regions), seed=sample_seed))
    return samples


def save_samples(samples, path):
    """Serialize a sample list as tab-separated lines."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("kind\tsources\tregions\tmethod\tlabel\tregime\tseed\n")
        for s in samples:
            f.write("\t".join([
                s.kind, ",".join(s.sources), region_flags(s.regions),
                s.method or "-", ",".join(str(v) for v in s.label),
                s.regime, str(s.seed),
            ]) + "\n")


def load_samples(path) -> list[SampleRecord]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    except FileNotFoundError as exc:
        raise errors.MissingFile(str(path)) from exc
    out = []
    for line in lines[1:]:
        kind, sources, regions, method, label, regime, seed = line.split("\t")
        out.append(SampleRecord(
            kind=kind, sources=tuple(sources.split(",")),
            regions=parse_region_flags(regions),
            method=None if method == "-" else method,
            label=tuple(int(v) for v in label.split(",")),
            regime=regime, seed=int(seed)))
    return out


def region_incidence(samples) -> dict:
    """Count how often each region is morphed across a sample list."""
    counts = {r: 0 for r in RegionId}
    for s in samples:
        for r in s.regions:
            counts[r] += 1
    return counts
