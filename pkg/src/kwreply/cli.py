"""Command-line entry point.

Reports go to stdout as JSON, logs to stderr.  Exit codes: 0 ok, 2 data
error, 3 config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus as C
from .pipeline import (Config, ConfigError, DataError, Model, chat, evaluate, load_split, prepare,
                       train_lda_stage, train_stage)

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 2, 3

log = logging.getLogger("kwreply")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")
    sys.stdout.flush()


def _config(args) -> Config:
    if args.config is None:
        raise ConfigError("--config is required")
    return Config.load(args.config, seed=args.seed)


def _checkpoint(cfg: Config, args) -> Model:
    path = Path(args.checkpoint) if getattr(args, "checkpoint", None) else Path(cfg.workdir) / "checkpoint.bin"
    if not path.is_file():
        raise DataError(f"no checkpoint at {path}; run train first")
    return Model.load(path)


def cmd_synth(args) -> int:
    """Write a synthetic toy corpus plus a matching config file."""
    out = Path(args.out)
    sc = C.synth_corpus(args.seed or 0, args.pairs, args.vocab_size)
    paths = C.write_synth_files(out, sc)
    cfg = {
        "corpus": "corpus.tsv", "emotion_dict": "emotion.dict", "topic_dict": "topic.dict",
        "stopwords": "stopwords.txt", "workdir": "run", "seed": args.seed or 0,
        "emb_dim": 32, "hidden_dim": 32, "lr": 0.01, "epochs": args.epochs,
        "lda_alpha": 0.1, "lda_restarts": 4, "val_size": args.val_size, "test_size": args.test_size,
    }
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _emit({"files": paths, "config": str(out / "config.json"), "pairs": len(sc.pairs)})
    return EXIT_OK


def cmd_prepare(args) -> int:
    split, stats = prepare(_config(args))
    _emit({"stats": stats, "manifest": str(Path(_config(args).workdir) / "manifest.json")})
    return EXIT_OK


def cmd_train_lda(args) -> int:
    cfg = _config(args)
    _, report = train_lda_stage(cfg)
    report["model"] = str(Path(cfg.workdir) / "lda.bin")
    _emit(report)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    model, history = train_stage(cfg)
    _emit({"checkpoint": str(Path(cfg.workdir) / "checkpoint.bin"), "history": history,
           "vocab_size": len(model.vocab)})
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _config(args)
    model = _checkpoint(cfg, args)
    tokens = C.tokenize(args.post)
    if not tokens:
        raise DataError("--post is empty")
    result = model.generate(tokens)
    out = {"post": tokens, "reply": " ".join(result.reply)}
    if args.trace:
        out["trace"] = result.trace
    _emit(out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    model = _checkpoint(cfg, args)
    split, *_ = load_split(cfg)
    if args.split not in split:
        raise DataError(f"unknown split {args.split!r}")
    pairs = split[args.split]
    if not pairs:
        raise DataError(f"split {args.split!r} is empty")
    report = evaluate(model, pairs, echo=args.echo)
    out = report.to_dict()
    out["split"] = args.split
    _emit(out)
    return EXIT_OK


def cmd_chat(args) -> int:
    cfg = _config(args)
    return chat(_checkpoint(cfg, args), trace=args.trace)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kwreply", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic toy corpus and config")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--vocab-size", type=int, default=120)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--val-size", type=int, default=10)
    p.add_argument("--test-size", type=int, default=20)
    p.set_defaults(func=cmd_synth)

    sub.add_parser("prepare", parents=[common], help="mark, filter and split the corpus").set_defaults(func=cmd_prepare)
    sub.add_parser("train-lda", parents=[common], help="fit the topic model").set_defaults(func=cmd_train_lda)
    sub.add_parser("train", parents=[common], help="train all networks").set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common], help="answer one post")
    p.add_argument("--post", required=True)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="score generated replies on a split")
    p.add_argument("--split", default="test")
    p.add_argument("--checkpoint")
    p.add_argument("--echo", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("chat", parents=[common], help="interactive loop on stdin")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_chat)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
