"""Command-line entry point wiring the pipeline:
vocab, preprocess, synth, train, embed, eval, cca.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
"""

import argparse
import datetime
import hashlib
import json
import os
import subprocess
import sys

import numpy as np

try:
    import tomllib
except ImportError:                     # Python 3.10
    import tomli as tomllib

from . import audio, cca as cca_mod, evaluation, io as cio, synth as synth_mod, tags as tags_mod
from . import training as training_mod
from .losses import LossWeights
from .training import Dataset, NumericalAbort, TrainConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _global_seed(value):
    if value is not None:
        return value
    return int(os.environ.get("COALA_SEED", "0"))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


def write_run_manifest(out_dir, config_echo, seed, inputs):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "config": config_echo,
        "seed": seed,
        "git_describe": _git_describe(),
        "inputs": {p: _sha256(p) for p in inputs if os.path.exists(p)},
        "started_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest


def _require(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    return path


# ------------------------------------------------------------- subcommands

def cmd_vocab(args):
    entries = cio.read_manifest(_require(args.infile))
    vocab = tags_mod.build_vocabulary([t for _, t in entries], max_size=args.max_size)
    tags_mod.save_vocabulary(args.out, vocab)
    print(f"wrote {vocab.size} tags to {args.out}")
    return 0


def cmd_preprocess(args):
    entries = cio.read_manifest(_require(args.infile))
    base = os.path.dirname(os.path.abspath(args.infile))
    patches = []
    for clip_path, _ in entries:
        full = clip_path if os.path.isabs(clip_path) else os.path.join(base, clip_path)
        clip = audio.conform(audio.load_wav(_require(full)))
        patches.append(audio.extract_patch(audio.logmel(clip), clip_id=clip_path))
    cio.save_patches(args.out, patches)
    print(f"wrote {len(patches)} patches to {args.out}")
    return 0


def cmd_synth(args):
    spec_kwargs = {}
    if args.spec:
        with open(_require(args.spec), "rb") as f:
            spec_kwargs = tomllib.load(f)
    spec = synth_mod.SyntheticCorpusSpec(**spec_kwargs)
    clips = synth_mod.synthesize_corpus(spec)
    os.makedirs(args.out, exist_ok=True)
    entries = []
    with open(os.path.join(args.out, "labels.csv"), "w") as f:
        f.write("clip_id,label\n")
        for c in clips:
            wav = f"{c.clip_id}.wav"
            audio.save_wav(os.path.join(args.out, wav), c.clip)
            entries.append((wav, c.tags))
            f.write(f"{c.clip_id},{c.label}\n")
    cio.write_manifest(os.path.join(args.out, "manifest.tsv"), entries)
    print(f"wrote {len(clips)} clips to {args.out}")
    return 0


def _load_train_config(args):
    raw = {}
    if args.config:
        with open(_require(args.config), "rb") as f:
            raw = tomllib.load(f)
    weights = LossWeights(**raw.pop("weights", {}))
    config = TrainConfig(weights=weights, **raw)
    # CLI flags override the config file
    if args.mode:
        config.mode = args.mode
    if args.epochs is not None:
        config.epochs = args.epochs
    if args.batch_size is not None:
        config.batch_size = args.batch_size
    if args.lr is not None:
        config.lr = args.lr
    if args.seed is not None:
        config.seed = args.seed
    elif "seed" not in raw:
        config.seed = _global_seed(None)
    if args.clip_norm is not None:
        config.clip_norm = args.clip_norm
    if args.contrastive_denominator == "include-positive":
        config.include_positive = True
    config.__post_init__()
    return config


def build_dataset(patches, manifest_entries, vocab):
    by_id = dict(manifest_entries)
    records = []
    for p in patches:
        raw = by_id.get(p.source_clip_id)
        if raw is None:
            raise ValueError(f"patch clip id {p.source_clip_id!r} missing from manifest")
        tv = tags_mod.encode(raw, vocab, clip_id=p.source_clip_id)
        if tv is not None:
            records.append((p, tv))
    return Dataset(records)


def cmd_train(args):
    config = _load_train_config(args)
    patches = cio.load_patches(_require(args.data))
    vocab = tags_mod.load_vocabulary(_require(args.vocab))
    entries = cio.read_manifest(_require(args.manifest))
    dataset = build_dataset(patches, entries, vocab)
    os.makedirs(args.out, exist_ok=True)
    inputs = [args.data, args.vocab, args.manifest] + ([args.config] if args.config else [])
    write_run_manifest(args.out, training_mod._config_dict(config, vocab.size, -1),
                       config.seed, inputs)
    log_path = os.path.join(args.out, "train_log.jsonl")
    with open(log_path, "w") as log_file:
        def log_fn(rec):
            log_file.write(json.dumps(rec) + "\n")
        result = training_mod.train(dataset, config, vocab_size=vocab.size,
                                    run_dir=args.out, log_fn=log_fn)
    print(f"trained {config.mode} for {config.epochs} epochs; "
          f"best epoch {result.best_epoch}; checkpoints in {args.out}")
    return 0


def cmd_embed(args):
    model, _ = training_mod.load_model(_require(args.checkpoint))
    patches = cio.load_patches(_require(args.data))
    emb = training_mod.extract_embeddings(model, patches)
    labels = {}
    if args.labels:
        with open(_require(args.labels), encoding="utf-8") as f:
            next(f)                              # clip_id,label header
            for line in f:
                if line.strip():
                    cid, label = line.strip().split(",")
                    labels[cid] = label
    def label_for(cid):
        stem = os.path.splitext(os.path.basename(cid))[0]
        return labels.get(cid, labels.get(stem, 0))
    rows = [(p.source_clip_id, label_for(p.source_clip_id), "all", emb[i])
            for i, p in enumerate(patches)]
    cio.write_features(args.out, rows)
    print(f"wrote {len(rows)} embeddings to {args.out}")
    return 0


def cmd_eval(args):
    train_path, test_path = args.features
    _, train_labels, _, train_x = cio.read_features(_require(train_path))
    _, test_labels, _, test_x = cio.read_features(_require(test_path))
    label_ids = {l: i for i, l in enumerate(sorted(set(train_labels) | set(test_labels)))}
    train_y = np.array([label_ids[l] for l in train_labels])
    test_y = np.array([label_ids[l] for l in test_labels])
    all_x = evaluation.standardize(train_x, np.concatenate([train_x, test_x]))
    config = evaluation.MlpConfig(repeats=args.repeats, seed=_global_seed(args.seed))
    mean, std, accs = evaluation.run_classification(
        all_x[:len(train_x)], train_y, all_x[len(train_x):], test_y, config)
    print(f"accuracy: {mean:.4f} +/- {std:.4f} over {args.repeats} repeats")
    print("per-repeat: " + " ".join(f"{a:.4f}" for a in accs))
    return 0


def cmd_cca(args):
    ids, _, _, emb = cio.read_features(_require(args.embeddings))
    entries = cio.read_manifest(_require(os.path.join(args.clips, "manifest.tsv")))
    descs = {}
    for clip_path, _ in entries:
        cid = clip_path
        clip = audio.conform(audio.load_wav(os.path.join(args.clips, clip_path)))
        descs[cid] = audio.descriptors(clip)
    embeddings = {cid: emb[i] for i, cid in enumerate(ids)}
    grid = cca_mod.report(embeddings, descs, top_k=args.top_k)
    print(cca_mod.render_report(grid))
    with open(args.out, "w") as f:
        f.write(cca_mod.report_csv(grid))
    return 0


# ---------------------------------------------------------------- dispatch

def make_parser():
    parser = _Parser(prog="coala",
                     description="Co-aligned audio/tag autoencoder pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build a tag vocabulary from a manifest")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-size", type=int, default=tags_mod.DEFAULT_VOCAB_SIZE)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("preprocess", help="wav manifest -> log-mel patch store")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synth", help="generate the synthetic labeled corpus")
    p.add_argument("--spec", default=None, help="TOML corpus spec (defaults used if omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train ae-c / e-c / cnn")
    p.add_argument("--mode", choices=("ae-c", "e-c", "cnn"), default=None)
    p.add_argument("--data", required=True, help="patch store")
    p.add_argument("--vocab", required=True)
    p.add_argument("--manifest", required=True, help="manifest TSV with per-clip tags")
    p.add_argument("--config", default=None, help="train config TOML")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--clip-norm", type=float, default=None)
    p.add_argument("--contrastive-denominator",
                   choices=("as-written", "include-positive"), default="as-written")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="extract encoder embeddings from patches")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", default=None,
                   help="optional clip_id,label CSV to attach class labels")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="downstream MLP classification")
    p.add_argument("--features", nargs=2, metavar=("TRAIN", "TEST"), required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cca", help="CCA similarity report")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--clips", required=True, help="corpus dir with manifest.tsv")
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=cmd_cca)
    return parser


def dispatch(argv):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:          # argparse --help
        return int(e.code or 0)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (NumericalAbort, FloatingPointError) as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 3


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
