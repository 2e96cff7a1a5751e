"""Command-line surface for batch jobs.

Commands: morph, dataset, train, eval, attack, lrp, inspect.
Global flags: --seed, --workers, --config, --out-dir. A config file holds
key=value lines; explicit command-line flags win over config values.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import errors
from .attack import (DEFAULT_EPSILONS, blackbox_attack, oracle_from_network,
                     train_substitute)
from .augment import crop_landmarks, normalize_crop
from .dataset import (build_regime, load_manifest, load_samples, save_samples,
                      select_pairs, split_dataset)
from .image import load_image, save_image
from .landmarks import parse_landmarks
from .lrp import LrpRuleAssignment, lrp_propagate, mean_adjust, region_relevance
from .nn import (build_network, evaluate, load_network, retrain_head,
                 save_network, train)
from .pipeline import FaceStore, RenderOptions, load_rendered, render_dataset
from .regions import RegionId, parse_region_flags
from .blend import compose_morph

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DATA_ERRORS = (errors.MissingFile, errors.ParseError, errors.CorruptData,
               errors.UnsupportedFormat, errors.DuplicateId,
               errors.WrongPointCount, errors.PointOutOfBounds,
               errors.InfeasibleConstraints, errors.InsufficientPairs,
               errors.EmptyDataset, errors.BadRatios)
NUMERIC_ERRORS = (errors.SolverDiverged, errors.FlowOverflow,
                  errors.CoverageGap, errors.BelowGate,
                  errors.NoCorrectlyDetectedMorphs)


def _read_config(path):
    cfg = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise errors.ParseError(f"{path}: bad config line {line!r}")
                key, value = line.split("=", 1)
                cfg[key.strip().replace("-", "_")] = value.strip()
    except FileNotFoundError as exc:
        raise errors.MissingFile(str(path)) from exc
    return cfg


def _merge_config(args, parser):
    """Fill argparse defaults from the config file; explicit flags win."""
    if not args.config:
        return args
    cfg = _read_config(args.config)
    subparser = getattr(args, "_subparser", None)
    for key, value in cfg.items():
        if not hasattr(args, key):
            continue
        default = parser.get_default(key)
        if default is None and subparser is not None:
            default = subparser.get_default(key)
        if getattr(args, key) == default:
            cur = getattr(args, key)
            if isinstance(cur, bool):
                value = value.lower() in ("1", "true", "yes")
            elif isinstance(cur, int):
                value = int(value)
            elif isinstance(cur, float):
                value = float(value)
            setattr(args, key, value)
    return args


def _render_opts(args):
    return RenderOptions(alpha=args.alpha, outer_source=args.outer_source,
                         sigma=args.sigma, crop_size=args.crop_size,
                         expand=not args.no_expand)


def cmd_morph(args):
    records = load_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    store = FaceStore(records, base)
    records = split_dataset(records, seed=args.seed)
    if args.pairs:
        pair_specs = []
        with open(args.pairs, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip() and not line.startswith("#"):
                    a, b, *rest = line.split()
                    method = rest[0] if rest else args.method
                    pair_specs.append((a, b, method))
    else:
        pairs = select_pairs(records, args.count, seed=args.seed)
        pair_specs = [(p.a.id, p.b.id, p.method) for p in pairs]

    os.makedirs(args.out_dir, exist_ok=True)
    prov_path = os.path.join(args.out_dir, "morphs.jsonl")
    regions = parse_region_flags(args.regions) if args.regions else None
    with open(prov_path, "w", encoding="utf-8") as prov:
        for i, (aid, bid, method) in enumerate(pair_specs):
            img_a, lm_a = store.get(aid)
            img_b, lm_b = store.get(bid)
            if regions is None:
                out = compose_morph(img_a, img_b, lm_a, lm_b, method,
                                    alpha=args.alpha, outer_source=args.outer_source,
                                    sigma=args.sigma)
            else:
                from .pipeline import render_base
                from .dataset import SampleRecord
                sample = SampleRecord(kind="partial_morph", sources=(aid, bid),
                                      regions=regions, method=method, label=(0,),
                                      regime="cli", seed=args.seed)
                out, _ = render_base(sample, store, _render_opts(args))
            name = f"morph{i:04d}_{aid}_{bid}.png"
            save_image(out, os.path.join(args.out_dir, name))
            prov.write(json.dumps({
                "file": name, "a": aid, "b": bid, "method": method,
                "alpha": args.alpha, "outer_source": args.outer_source,
                "regions": args.regions or "----", "seed": args.seed,
            }, sort_keys=True) + "\n")
    print(f"wrote {len(pair_specs)} morphs to {args.out_dir}")


def cmd_dataset(args):
    records = load_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    records = split_dataset(records, seed=args.seed)
    subset = [r for r in records if r.split == args.split]
    pairs = select_pairs(subset, args.pairs_count, seed=args.seed + 1)
    samples = build_regime(subset, pairs, args.regime, args.total,
                           seed=args.seed + 2)
    os.makedirs(args.out_dir, exist_ok=True)
    save_samples(samples, os.path.join(args.out_dir, "samples.tsv"))
    store = FaceStore(records, base)
    render_dataset(samples, store, args.out_dir, _render_opts(args),
                   workers=args.workers)
    print(f"rendered {len(samples)} samples ({args.regime}) to {args.out_dir}")


def cmd_train(args):
    data = load_rendered(args.data)
    head = "sigmoid" if args.regime == "multiclass" else "softmax"
    y = data.labels.astype(np.float64) if head == "sigmoid" \
        else data.one_hot_binary()
    size = data.x.shape[1]
    net = build_network(input_size=size, channels=data.x.shape[3],
                        head=head, seed=args.seed)
    curve = train(net, data.x, y, lr=args.lr, momentum=args.momentum,
                  epochs=args.epochs, batch=args.batch, seed=args.seed)
    if args.retrain_head_data:
        binary_data = load_rendered(args.retrain_head_data)
        net, curve2 = retrain_head(net, binary_data.x,
                                   binary_data.one_hot_binary(),
                                   lr_last=args.lr, epochs=args.epochs,
                                   batch=args.batch, seed=args.seed)
        curve = curve + curve2
    os.makedirs(args.out_dir, exist_ok=True)
    save_network(net, os.path.join(args.out_dir, "model.bin"))
    with open(os.path.join(args.out_dir, "loss_curve.tsv"), "w") as f:
        f.write("epoch\tloss\n")
        for i, v in enumerate(curve):
            f.write(f"{i}\t{v:.10f}\n")
    print(f"trained model -> {args.out_dir}/model.bin (final loss {curve[-1]:.4f})")


def cmd_eval(args):
    net = load_network(args.model)
    data = load_rendered(args.data)
    report = evaluate(net, data.x, data.one_hot_binary())
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "report.json"), "w") as f:
        json.dump({"tpr": report["tpr"], "tnr": report["tnr"],
                   "eer": report["eer"]}, f, sort_keys=True, indent=2)
    with open(os.path.join(args.out_dir, "threshold_curve.tsv"), "w") as f:
        f.write("threshold\ttpr\ttnr\n")
        for t, tpr, tnr in report["curve"]:
            f.write(f"{t:.6f}\t{tpr:.6f}\t{tnr:.6f}\n")
    print(f"TPR {report['tpr']:.3f}  TNR {report['tnr']:.3f}  EER {report['eer']:.3f}")


def cmd_attack(args):
    net = load_network(args.model)
    oracle = oracle_from_network(net)
    seeds = load_rendered(args.seed_data)
    sub = build_network(input_size=seeds.x.shape[1], channels=seeds.x.shape[3],
                        head="softmax", seed=args.seed + 7)
    result = train_substitute(oracle, seeds.x, rounds=args.rounds,
                              lam=args.lam, sub_net=sub, seed=args.seed)
    morphs = load_rendered(args.morph_data)
    attack_x = morphs.x[morphs.labels[:, 0] == 0]
    epsilons = [float(e) for e in args.epsilons.split(",")]
    curve = blackbox_attack(oracle, result.net, attack_x, epsilons)
    os.makedirs(args.out_dir, exist_ok=True)
    curve.save(os.path.join(args.out_dir, "robustness.tsv"))
    if args.dump_adversarials:
        from .attack import fgsm, MORPH
        for eps in epsilons:
            if eps == 0:
                continue
            adv = fgsm(result.net, attack_x, MORPH, eps)
            for i in range(min(len(adv), 8)):
                save_image(adv[i], os.path.join(
                    args.out_dir, f"adv_eps{eps:g}_{i}.png"))
    print(f"robustness curve -> {args.out_dir}/robustness.tsv "
          f"(agreement {result.agreement[-1]:.2f})")


def cmd_lrp(args):
    net = load_network(args.model)
    raw = load_image(args.image)
    lm_raw = parse_landmarks(args.landmarks, (raw.shape[1], raw.shape[0]))
    img = normalize_crop(raw, lm_raw, size=args.crop_size)
    lm = crop_landmarks(lm_raw, size=args.crop_size)
    rules = LrpRuleAssignment(epsilon=args.lrp_epsilon)
    rel = lrp_propagate(net, img, args.class_index, rules,
                        gate=None if args.no_gate else 0.1)
    os.makedirs(args.out_dir, exist_ok=True)
    np.savetxt(os.path.join(args.out_dir, "relevance.tsv"), rel, delimiter="\t")
    adjusted = mean_adjust([rel])[0] if args.mean_adjust else rel
    # diverging heatmap: positive relevance in red, negative in blue
    scale = max(np.abs(rel).max(), 1e-12)
    heat = np.zeros(rel.shape + (3,))
    heat[:, :, 0] = np.clip(rel / scale, 0.0, 1.0)
    heat[:, :, 2] = np.clip(-rel / scale, 0.0, 1.0)
    save_image(heat, os.path.join(args.out_dir, "heatmap.png"))
    try:
        fractions = region_relevance(np.maximum(adjusted, 0.0), lm)
        with open(os.path.join(args.out_dir, "region_fractions.tsv"), "w") as f:
            f.write("region\tfraction\n")
            for region in RegionId:
                f.write(f"{region.name.lower()}\t{fractions[region]:.4f}\n")
        print("  ".join(f"{r.name.lower()}={fractions[r]:.3f}" for r in RegionId))
    except errors.ZeroRegionRelevance:
        print("no positive relevance inside the four regions")


def cmd_inspect(args):
    if args.model:
        net = load_network(args.model)
        n_params = sum(v.size for _, v, _ in net.params())
        print(f"network head={net.head} layers={len(net.layers)} params={n_params}")
        for i, layer in enumerate(net.layers):
            print(f"  [{i}] {layer.spec()}")
    if args.data:
        samples = load_samples(args.data)
        kinds = {}
        for s in samples:
            kinds[s.kind] = kinds.get(s.kind, 0) + 1
        print(f"{len(samples)} samples: " +
              ", ".join(f"{k}={v}" for k, v in sorted(kinds.items())))


def build_parser():
    p = argparse.ArgumentParser(prog="morphforge", description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", default="out")
    sub = p.add_subparsers(dest="command", required=True)

    def add_render_flags(sp):
        sp.add_argument("--alpha", type=float, default=0.5)
        sp.add_argument("--method", choices=("triangle", "field"), default="triangle")
        sp.add_argument("--outer-source", choices=("A", "B"), default="A")
        sp.add_argument("--sigma", type=float, default=None)
        sp.add_argument("--crop-size", type=int, default=64)
        sp.add_argument("--no-expand", action="store_true")

    sp = sub.add_parser("morph", help="render complete or partial morphs")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--pairs", default=None, help="file with 'idA idB [method]' lines")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--regions", default=None, help="4-char flags, e.g. L--- or LRNM")
    add_render_flags(sp)
    sp.set_defaults(func=cmd_morph)

    sp = sub.add_parser("dataset", help="split, pair, build regime, render")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--regime", choices=("naive", "one_region", "complex",
                                         "multiclass"), default="naive")
    sp.add_argument("--split", choices=("train", "test", "val"), default="train")
    sp.add_argument("--total", type=int, default=100)
    sp.add_argument("--pairs-count", type=int, default=20)
    add_render_flags(sp)
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("train", help="train the desk-scale classifier")
    sp.add_argument("--data", required=True)
    sp.add_argument("--regime", default="naive")
    sp.add_argument("--retrain-head-data", default=None)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--momentum", type=float, default=0.9)
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--batch", type=int, default=32)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="TPR/TNR/EER report")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("attack", help="substitute-model black-box attack")
    sp.add_argument("--model", required=True)
    sp.add_argument("--seed-data", required=True)
    sp.add_argument("--morph-data", required=True)
    sp.add_argument("--rounds", type=int, default=2)
    sp.add_argument("--lam", type=float, default=0.1)
    sp.add_argument("--epsilons", default=",".join(str(e) for e in DEFAULT_EPSILONS))
    sp.add_argument("--dump-adversarials", action="store_true")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("lrp", help="relevance heatmap and region fractions")
    sp.add_argument("--model", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--landmarks", required=True)
    sp.add_argument("--class-index", type=int, default=0)
    sp.add_argument("--crop-size", type=int, default=64)
    sp.add_argument("--lrp-epsilon", type=float, default=1e-2)
    sp.add_argument("--no-gate", action="store_true")
    sp.add_argument("--mean-adjust", action="store_true")
    sp.set_defaults(func=cmd_lrp)

    sp = sub.add_parser("inspect", help="summarize a model or sample list")
    sp.add_argument("--model", default=None)
    sp.add_argument("--data", default=None)
    sp.set_defaults(func=cmd_inspect)

    # accept the global flags after the subcommand too; SUPPRESS keeps an
    # absent flag from clobbering the value parsed by the main parser
    for child in sub.choices.values():
        child.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        child.add_argument("--workers", type=int, default=argparse.SUPPRESS)
        child.add_argument("--config", default=argparse.SUPPRESS)
        child.add_argument("--out-dir", default=argparse.SUPPRESS)
        child.set_defaults(_subparser=child)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, parser)
    except errors.MorphforgeError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
        return EXIT_OK
    except DATA_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_NUMERIC
    except errors.MorphforgeError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
