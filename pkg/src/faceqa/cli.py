"""Command-line entry point: ``faceqa <command> [flags]``.

Commands that write a single file take ``--out FILE``; commands that write
several files (train, eval, simulate, pipeline) take ``--out DIR``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import gallery, labeler, metrics, synth, trainer
from .core import DataError, NumericError, load_jsonl, save_jsonl

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("faceqa")


class UsageError(Exception):
    pass


def _existing(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    return p


def _outdir(path: str | Path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _train_config(args) -> trainer.TrainConfig:
    try:
        return trainer.TrainConfig(
            learning_rate=args.lr, momentum=args.momentum, weight_decay=args.weight_decay,
            batch_size=args.batch_size, epochs=args.epochs,
            train_fraction=args.train_fraction, seed=args.seed)
    except trainer.ConfigError as exc:
        raise UsageError(str(exc)) from None


def _synth_spec(args) -> synth.SynthSpec:
    try:
        return synth.SynthSpec(
            n_subjects=args.subjects, images_per_subject=args.images_per_subject,
            dim=args.dim, noise_low=args.noise_low, noise_high=args.noise_high,
            centroid_scale=args.centroid_scale, seed=args.seed)
    except DataError as exc:
        raise UsageError(str(exc)) from None


# --- commands -----------------------------------------------------------------

def cmd_partition(embeddings, policy, seed, out) -> gallery.GalleryPartition:
    ds = load_jsonl(_existing(embeddings))
    part = gallery.partition(ds, policy=policy, seed=seed)
    gallery.save_manifest(part, out)
    log.info("partition: %d templates, %d probes -> %s",
             len(part.templates), len(part.probes), out)
    return part


def cmd_label(embeddings, manifest, out) -> list[labeler.QualityLabel]:
    ds = load_jsonl(_existing(embeddings))
    part = gallery.from_manifest(ds, gallery.load_manifest(_existing(manifest)))
    labels = labeler.label_dataset(part)
    labeler.save_labels(labels, out)
    log.info("label: %d labels -> %s", len(labels), out)
    return labels


def cmd_train(embeddings, labels, config: trainer.TrainConfig, out):
    ds = load_jsonl(_existing(embeddings))
    labs = labeler.load_labels(_existing(labels))
    head, hist = trainer.train(labs, ds, config)
    out = _outdir(out)
    trainer.save_model(head, out / "model.json", config)
    trainer.save_history(hist, out / "history.csv")
    log.info("train: final train %.6g, test %.6g -> %s",
             hist.train_loss[-1], hist.test_loss[-1], out)
    return head, hist


def cmd_score(model, embeddings, out) -> np.ndarray:
    head, _ = trainer.load_model(_existing(model))
    ds = load_jsonl(_existing(embeddings))
    q = trainer.predict(head, ds.matrix())
    with Path(out).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("subject,image,quality\n")
        for rec, v in zip(ds, q):
            fh.write(f"{rec.subject_id},{rec.image_id},{format(float(v), '.17g')}\n")
    return q


def cmd_eval(embeddings, grid_size, bins, out, model=None) -> metrics.EerResult:
    ds = load_jsonl(_existing(embeddings))
    pairs = metrics.build_pairs(ds)
    c = metrics.curve(pairs, metrics.default_grid(pairs, grid_size))
    res = metrics.eer(c)
    out = _outdir(out)
    metrics.save_curve(c, out / "curve.csv")
    metrics.save_eer(res, pairs, out / "eer.json")
    metrics.save_histograms(metrics.distance_histograms(pairs, bins), out / "hist.csv")
    if model is not None:
        head, _ = trainer.load_model(_existing(model))
        q = trainer.predict(head, ds.matrix())
        stats = {"n": int(q.size), "mean": float(q.mean()), "std": float(q.std()),
                 "min": float(q.min()), "max": float(q.max())}
        (out / "quality_stats.json").write_text(json.dumps(stats, indent=1) + "\n")
    log.info("eval: EER %.4f at threshold %.4f -> %s", res.eer, res.threshold, out)
    return res


def cmd_simulate(spec: synth.SynthSpec, out):
    ds, truth = synth.generate(spec)
    out = _outdir(out)
    save_jsonl(ds, out / "embeddings.jsonl")
    synth.save_truth(truth, out / "truth.csv", [r.key for r in ds])
    return ds, truth


PIPELINE_DEFAULTS = {
    "seed": 0,
    "embeddings": None,
    "simulate": {"subjects": 50, "images_per_subject": 10, "dim": 32,
                 "noise_low": 0.05, "noise_high": 1.0, "centroid_scale": 1.0},
    "policy": "first",
    "train": {},
    "grid_size": metrics.DEFAULT_GRID_SIZE,
    "bins": 32,
}


def cmd_pipeline(config_path, out=None) -> Path:
    """Run simulate/ingest -> partition -> label -> train -> score -> eval.

    The config is a JSON object; see ``PIPELINE_DEFAULTS`` for keys. ``train``
    takes :class:`~faceqa.trainer.TrainConfig` field names. A single ``seed``
    drives simulation, template selection and training. Relative paths resolve
    against the config file's directory.
    """
    config_path = _existing(config_path)
    try:
        user = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{config_path}: invalid JSON ({exc})") from None
    unknown = set(user) - set(PIPELINE_DEFAULTS) - {"out"}
    if unknown:
        raise UsageError(f"unknown pipeline config keys: {sorted(unknown)}")
    cfg = {**PIPELINE_DEFAULTS, **user}
    base = config_path.parent
    out = _outdir(out if out is not None else base / cfg.get("out", "run"))
    seed = int(cfg["seed"])

    if cfg["embeddings"]:
        emb = base / cfg["embeddings"]
    else:
        sim = {**PIPELINE_DEFAULTS["simulate"], **cfg["simulate"]}
        try:
            spec = synth.SynthSpec(
                n_subjects=sim["subjects"], images_per_subject=sim["images_per_subject"],
                dim=sim["dim"], noise_low=sim["noise_low"], noise_high=sim["noise_high"],
                centroid_scale=sim["centroid_scale"], seed=seed)
        except (DataError, KeyError) as exc:
            raise UsageError(f"bad simulate config: {exc}") from None
        cmd_simulate(spec, out)
        emb = out / "embeddings.jsonl"

    try:
        tcfg = trainer.TrainConfig(**{**cfg["train"], "seed": seed})
    except (trainer.ConfigError, TypeError) as exc:
        raise UsageError(f"bad train config: {exc}") from None

    cmd_partition(emb, cfg["policy"], seed, out / "partition.json")
    cmd_label(emb, out / "partition.json", out / "labels.csv")
    cmd_train(emb, out / "labels.csv", tcfg, out)
    cmd_score(out / "model.json", emb, out / "scores.csv")
    cmd_eval(emb, int(cfg["grid_size"]), int(cfg["bins"]), out, model=out / "model.json")
    return out


# --- argument parsing -----------------------------------------------------------

def _add_train_flags(p):
    d = trainer.TrainConfig()
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--train-fraction", type=float, default=d.train_fraction)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faceqa", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="split embeddings into templates and probes")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--policy", choices=gallery.POLICIES, default="first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="manifest JSON path")

    p = sub.add_parser("label", help="compute quality labels for probes")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="labels CSV path")

    p = sub.add_parser("train", help="train the sigmoid quality head")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="directory for model.json and history.csv")

    p = sub.add_parser("score", help="predict quality for every embedding")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True, help="scores CSV path")

    p = sub.add_parser("eval", help="FAR/FRR curve, EER and distance histograms")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--grid-size", type=int, default=metrics.DEFAULT_GRID_SIZE)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--model", default=None, help="also report predicted-quality statistics")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="generate a synthetic embedding set")
    s = synth.SynthSpec()
    p.add_argument("--subjects", type=int, default=s.n_subjects)
    p.add_argument("--images-per-subject", type=int, default=s.images_per_subject)
    p.add_argument("--dim", type=int, default=s.dim)
    p.add_argument("--noise-low", type=float, default=s.noise_low)
    p.add_argument("--noise-high", type=float, default=s.noise_high)
    p.add_argument("--centroid-scale", type=float, default=s.centroid_scale)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("pipeline", help="run every stage from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    return ap


def run(args) -> None:
    c = args.command
    if c == "partition":
        cmd_partition(args.embeddings, args.policy, args.seed, args.out)
    elif c == "label":
        cmd_label(args.embeddings, args.manifest, args.out)
    elif c == "train":
        cmd_train(args.embeddings, args.labels, _train_config(args), args.out)
    elif c == "score":
        cmd_score(args.model, args.embeddings, args.out)
    elif c == "eval":
        if args.grid_size < 2 or args.bins < 1:
            raise UsageError("--grid-size must be >= 2 and --bins >= 1")
        cmd_eval(args.embeddings, args.grid_size, args.bins, args.out, args.model)
    elif c == "simulate":
        cmd_simulate(_synth_spec(args), args.out)
    elif c == "pipeline":
        cmd_pipeline(args.config, args.out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except UsageError as exc:
        print(f"faceqa {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"faceqa {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"faceqa {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
