"""Command-line entry point: ``punct-embed <subcommand> ...``.

Option values resolve as flags > ``PUNCT_EMBED_<FLAG>`` environment variables
> ``--config`` file (a flat JSON object keyed by flag name) > built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

ENV_PREFIX = "PUNCT_EMBED_"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# argument definitions


def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--seed", type=int, default=0, help="seed for every random draw (default 0)")
    g.add_argument("--threads", type=int, default=1, help="featurisation worker threads (default 1)")
    g.add_argument("--config", help="flat JSON file of flag values")
    g.add_argument("--subset", type=int, help="use only the first N samples of --data")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _data_args(p, splits=True):
    p.add_argument("--data", required=True, help="JSON-lines dataset")
    if splits:
        p.add_argument("--splits", help="splits file written by make-splits")
        p.add_argument("--fold", type=int, default=0, help="fold index within --splits (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="punct-embed", description="Punctuation-aware sentence embeddings.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    from .model import ModelConfig, VARIANTS

    d = ModelConfig("proposed")

    p = sub.add_parser("train", help="train a classifier and write a checkpoint")
    p.add_argument("--variant", choices=VARIANTS, default="proposed")
    _data_args(p)
    p.add_argument("--val-data", help="validation dataset (overrides the --splits validation part)")
    p.add_argument("--vectors", help="pretrained word vectors, one 'token floats...' per line")
    p.add_argument("--context", help="external text contexts ('id floats...' per sample) fused by the proposed variant")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="training log CSV (default <out>.log.csv)")
    p.add_argument("--embedding-dim", type=int, default=d.embedding_dim)
    p.add_argument("--text-hidden", type=int, default=d.text_hidden)
    p.add_argument("--tree-hidden", type=int, default=d.tree_hidden)
    p.add_argument("--fusion-hidden", type=int, default=d.fusion_hidden)
    p.add_argument("--fusion-out", type=int, default=d.fusion_out)
    p.add_argument("--classifier-hidden", default=",".join(map(str, d.classifier_hidden)), help="comma-separated widths")
    p.add_argument("--max-tokens", type=int, default=d.max_tokens)
    p.add_argument("--max-tree-nodes", type=int, default=d.max_tree_nodes)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=5, help="epochs without improvement before stopping; 0 disables")
    p.add_argument("--target-accuracy", type=float, help="stop once validation accuracy reaches this")
    p.add_argument("--min-count", type=int, default=1)
    _common(p)

    p = sub.add_parser("eval", help="print classification accuracy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--context", help="external text contexts, needed if the checkpoint fuses one")
    _data_args(p)
    _common(p)

    p = sub.add_parser("embed", help="write one sentence embedding per sample")
    p.add_argument("--checkpoint", required=True)
    _data_args(p)
    p.add_argument("--out", required=True, help="vector file: 'width d' header then 'id floats...'")
    p.add_argument("--strip", action="store_true", help="embed the punctuation-stripped texts")
    p.add_argument("--context", help="external text contexts, needed if the checkpoint fuses one")
    _common(p)

    p = sub.add_parser("report-similarity", help="similarity of embeddings with and without punctuation")
    p.add_argument("--checkpoint", required=True)
    _data_args(p)
    p.add_argument("--part", choices=("train", "val", "test"), default="test", help="split part used with --splits (default test)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG histogram")
    _common(p)

    p = sub.add_parser("case-study", help="similarity table for sentence pairs under several checkpoints")
    p.add_argument("--checkpoint", action="append", required=True, help="repeatable; one per variant")
    p.add_argument("--pairs", help="JSON pairs file (default: the bundled case studies)")
    p.add_argument("--group", help="keep only pairs of this group")
    p.add_argument("--randomize", action="store_true", help="replace every punctuation mark with a random one from . , ! ?")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--figure", help="optional PNG bar chart path")
    _common(p)

    p = sub.add_parser("make-splits", help="write k seeded train/val/test index splits")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset whose size is split")
    src.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--ratios", default="45,5,50", help="train,val,test percentages")
    p.add_argument("--out", required=True, help="JSON splits file")
    _common(p)

    p = sub.add_parser("synth-data", help="generate a synthetic review corpus with gold trees")
    p.add_argument("--kind", choices=("review", "keyword"), default="review")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("import-sst2", help="convert a GLUE SST-2 TSV file to the dataset format")
    p.add_argument("--tsv", required=True)
    p.add_argument("--out", required=True)
    _common(p)
    return parser


# ---------------------------------------------------------------------------
# config / environment layering


def _actions(p: argparse.ArgumentParser) -> dict[str, argparse.Action]:
    return {a.dest: a for a in p._actions if a.dest not in ("help", "config") and a.option_strings}


def _coerce(action: argparse.Action, value, source: str):
    if action.nargs == 0:  # store_true / store_false
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off", ""):
            return False
        raise ConfigError(f"{source}: expected a boolean, got {value!r}")
    if isinstance(action, argparse._AppendAction) and not isinstance(value, list):
        value = [value]
    if isinstance(value, (list, tuple)) and not isinstance(action, argparse._AppendAction):
        value = ",".join(map(str, value))
    conv = action.type or str
    try:
        out = [conv(v) for v in value] if isinstance(value, list) else (None if value is None else conv(value))
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: invalid value {value!r}") from None
    if action.choices is not None and out is not None and out not in action.choices:
        raise ConfigError(f"{source}: {out!r} is not one of {sorted(action.choices)}")
    return out


def _layered_defaults(p: argparse.ArgumentParser, config_path: str | None, environ) -> dict:
    actions = _actions(p)
    merged = {}
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"{config_path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{config_path}: config must be a flat JSON object")
        for key, value in doc.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in actions:
                raise ConfigError(f"{config_path}: unknown key {key!r} for '{p.prog}'")
            merged[dest] = _coerce(actions[dest], value, f"{config_path}: {key}")
    for dest, action in actions.items():
        name = ENV_PREFIX + dest.upper()
        if name in environ:
            merged[dest] = _coerce(action, environ[name], name)
    return merged


def _relax(sub, dests=None) -> list:
    """Mark required flags (and groups) optional; returns what was changed so it can be restored."""
    changed = [a for a in sub._actions if a.required and (dests is None or a.dest in dests)]
    changed += [g for g in sub._mutually_exclusive_groups
                if g.required and (dests is None or any(a.dest in dests for a in g._group_actions))]
    for obj in changed:
        obj.required = False
    return changed


def parse_args(argv, environ=None):
    environ = os.environ if environ is None else environ
    parser = build_parser()
    subs = parser._subparsers._group_actions[0].choices
    # first pass only finds the subcommand and --config; required flags may come from either layer
    relaxed = [obj for sub in subs.values() for obj in _relax(sub)]
    args = parser.parse_args(argv)
    for obj in relaxed:
        obj.required = True
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("punct-embed: error: a subcommand is required")
    sub = subs[args.command]
    layered = _layered_defaults(sub, getattr(args, "config", None), environ)
    _relax(sub, set(layered))
    sub.set_defaults(**layered)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# commands


def _load_data(args):
    from .data import load_dataset

    return load_dataset(args.data).head(args.subset)


def _split_part(dataset, args, part: str):
    if not getattr(args, "splits", None):
        return dataset
    doc = json.loads(Path(args.splits).read_text(encoding="utf-8"))
    folds = doc["folds"]
    if not 0 <= args.fold < len(folds):
        raise ConfigError(f"--fold {args.fold} outside 0..{len(folds) - 1}")
    if doc.get("n") != len(dataset):
        raise ConfigError(f"{args.splits} was made for {doc.get('n')} samples, dataset has {len(dataset)}")
    return dataset.subset(folds[args.fold][part])


def _contexts(args):
    if not getattr(args, "context", None):
        return None, 0
    from .data import read_vectors

    width, rows = read_vectors(args.context)
    return rows, width


def _model_config(args, num_classes: int = 2, context_dim: int = 0):
    from .model import ModelConfig

    try:
        hidden = tuple(int(x) for x in str(args.classifier_hidden).split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"--classifier-hidden must be comma-separated integers, got {args.classifier_hidden!r}") from None
    return ModelConfig(
        variant=args.variant,
        embedding_dim=args.embedding_dim,
        text_hidden=args.text_hidden,
        tree_hidden=args.tree_hidden,
        fusion_hidden=args.fusion_hidden,
        fusion_out=args.fusion_out,
        classifier_hidden=hidden,
        max_tokens=args.max_tokens,
        max_tree_nodes=args.max_tree_nodes,
        num_classes=num_classes,
        external_context_dim=context_dim,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .data import load_dataset, vocab_for
    from .text import load_pretrained_vectors, random_embedding_table
    from .training import TrainConfig, build_model, train

    data = _load_data(args)
    train_set = _split_part(data, args, "train")
    val_set = _split_part(data, args, "val") if args.splits else None
    if args.val_data:
        val_set = load_dataset(args.val_data)
    contexts, width = _contexts(args)
    mc = _model_config(args, data.num_classes, width)
    tc = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        seed=args.seed,
        patience=args.patience or None,
        target_accuracy=args.target_accuracy,
        min_count=args.min_count,
        threads=args.threads,
    )
    vocab = vocab_for(train_set, mc, args.min_count)
    if args.vectors:
        table = load_pretrained_vectors(args.vectors, vocab, mc.embedding_dim, mc.seed)
        logging.info("pretrained vectors matched %d of %d vocabulary entries", table.matched, len(vocab))
    else:
        table = random_embedding_table(vocab, mc.embedding_dim, mc.seed)
    model = build_model(mc, train_set, vocab, table)
    model, history = train(mc, tc, train_set, val_set, model, contexts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.csv")
    history.write(log_path)
    best = history.records[history.best_epoch]
    print(f"checkpoint={out}")
    print(f"log={log_path}")
    print(f"best_epoch={history.best_epoch} val_acc={best.val_acc:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .training import evaluate_accuracy

    model = load_checkpoint(args.checkpoint)
    data = _split_part(_load_data(args), args, "test")
    print(f"accuracy={evaluate_accuracy(model, data, contexts=_contexts(args)[0]):.6f}")
    return EXIT_OK


def cmd_embed(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import batches, write_vectors
    from .training import featurize_all

    model = load_checkpoint(args.checkpoint)
    data = _split_part(_load_data(args), args, "test") if args.splits else _load_data(args)
    examples = featurize_all(data, model, args.threads, _contexts(args)[0], strip=args.strip)
    vecs = np.concatenate([model.embed(b) for b in batches(examples, 64)])
    write_vectors(args.out, [e.id for e in examples], vecs)
    print(f"vectors={args.out} count={len(examples)} width={vecs.shape[1]}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .analysis import punctuation_sensitivity_report
    from .checkpoint import load_checkpoint

    model = load_checkpoint(args.checkpoint)
    data = _split_part(_load_data(args), args, args.part)
    report = punctuation_sensitivity_report(model, data)
    for path in report.write(args.out, figure=not args.no_figure):
        print(f"wrote={path}")
    s = report.summary()
    print(f"variant={s['variant']} count={s['count']} skipped={s['skipped']} mean={s['mean']:.6f} min={s['min']:.6f} max={s['max']:.6f}")
    return EXIT_OK


def cmd_case_study(args) -> int:
    from .analysis import CasePair, case_study, load_case_pairs, randomize_punctuation, write_case_study
    from .checkpoint import load_checkpoint

    pairs = load_case_pairs(args.pairs, args.group)
    if not pairs:
        raise ConfigError("no case-study pairs selected")
    if args.randomize:
        rng = np.random.default_rng(args.seed)
        pairs = [CasePair(p.id, randomize_punctuation(p.with_text, rng), p.without_text, p.group) for p in pairs]
    models = {}
    for path in args.checkpoint:
        m = load_checkpoint(path)
        name = m.config.variant
        while name in models:
            name += "'"
        models[name] = m
    rows = case_study(models, pairs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_case_study(rows, out)
    print(f"wrote={out}")
    if args.figure:
        from .plotting import plot_case_study

        print(f"wrote={plot_case_study(rows, args.figure)}")
    return EXIT_OK


def cmd_make_splits(args) -> int:
    from .training import SplitSpec, make_splits

    n = args.n if args.n is not None else len(_load_data(args))
    try:
        ratios = tuple(int(x) for x in args.ratios.split(","))
    except ValueError:
        raise ConfigError(f"--ratios must be three integers, got {args.ratios!r}") from None
    spec = SplitSpec(args.k, ratios, args.seed)
    folds = make_splits(n, spec)
    doc = {
        "n": n,
        "k": spec.k,
        "ratios": list(ratios),
        "seed": spec.seed,
        "folds": [{"train": a.tolist(), "val": b.tolist(), "test": c.tolist()} for a, b, c in folds],
    }
    Path(args.out).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    a, b, c = folds[0]
    print(f"splits={args.out} k={spec.k} sizes={len(a)},{len(b)},{len(c)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .data import save_dataset
    from .synthetic import keyword_corpus, review_corpus

    ds = review_corpus(args.n, args.seed) if args.kind == "review" else keyword_corpus(args.n, args.seed)
    save_dataset(ds, args.out)
    print(f"dataset={args.out} count={len(ds)}")
    return EXIT_OK


def cmd_import(args) -> int:
    from .data import import_sst2_tsv, save_dataset

    ds = import_sst2_tsv(args.tsv).head(args.subset)
    save_dataset(ds, args.out)
    print(f"dataset={args.out} count={len(ds)}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "embed": cmd_embed,
    "report-similarity": cmd_report,
    "case-study": cmd_case_study,
    "make-splits": cmd_make_splits,
    "synth-data": cmd_synth,
    "import-sst2": cmd_import,
}


def main(argv=None, environ=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv, environ)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"punct-embed: config error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        detail = f"{exc.filename}: {exc.strerror}" if isinstance(exc, OSError) and exc.filename else exc
        print(f"punct-embed {args.command}: error: {detail}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
