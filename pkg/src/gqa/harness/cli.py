"""Command-line entry point: ``gqa <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from gqa.data import (
    Vocabulary,
    corpus_tokens,
    dumps_hotpot,
    generate_synthetic,
    load_hotpot_json,
    load_pretrained_embeddings,
)
from gqa.errors import ContractError, GQAError
from gqa.harness.config import dumps_config, load_config
from gqa.harness.metrics import evaluate
from gqa.harness.training import train
from gqa.model import GQAModel, count_params, format_param_report, load_checkpoint
from gqa.topology import default_lambda, example_topology

# flags shared by every subcommand that builds or configures a model
_CONFIG_FLAGS = [
    ("--emb-dim", int),
    ("--char-emb-dim", int),
    ("--char-dim", int),
    ("--hidden", int),
    ("--steps", int),
    ("--ggnn-hidden", int),
    ("--pool-dim", int),
    ("--lambda-train", float),
    ("--lambda-test", float),
    ("--optimizer", str),
    ("--lr", float),
    ("--lr-schedule", str),
    ("--clip-norm", float),
    ("--batch-size", int),
    ("--epochs", int),
    ("--seed", int),
    ("--w-sp", float),
    ("--w-type", float),
    ("--sp-threshold", float),
    ("--train", str),
    ("--dev", str),
    ("--embeddings", str),
    ("--checkpoint-dir", str),
]
_DEST = {"train": "train_path", "dev": "dev_path", "embeddings": "embeddings_path"}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override its values")
    for flag, kind in _CONFIG_FLAGS:
        name = flag[2:].replace("-", "_")
        p.add_argument(flag, type=kind, dest=_DEST.get(name, name), default=None)


def _config_from(args):
    names = [_DEST.get(n, n) for n in (flag[2:].replace("-", "_") for flag, _ in _CONFIG_FLAGS)]
    return load_config(args.config, **{k: getattr(args, k) for k in names})


def _pick(examples, args):
    if args.id is not None:
        for ex in examples:
            if ex.id == args.id:
                return ex
        raise ContractError(f"no example with id {args.id!r}")
    if not 0 <= args.index < len(examples):
        raise ContractError(f"index {args.index} out of range for {len(examples)} examples")
    return examples[args.index]


def cmd_gen_data(args) -> int:
    text = dumps_hotpot(generate_synthetic(args.n, args.vocab_size, args.seed))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_train(args) -> int:
    config = _config_from(args)
    result = train(config)
    summary = {
        "epochs": [h.to_dict() for h in result.history],
        "best_dev_f1": result.best_dev_f1,
        "best_epoch": result.best_epoch,
        "skipped": result.skipped,
    }
    print(json.dumps(summary, indent=1))
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    examples = load_hotpot_json(args.data)
    report = evaluate(ckpt, examples, lam=args.lambda_test, threshold=args.sp_threshold)
    print(json.dumps(report.to_dict(), indent=1))
    if args.records:
        Path(args.records).write_text(json.dumps(report.records, indent=1) + "\n", encoding="utf-8")
    return 0


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    example = _pick(load_hotpot_json(args.data), args)
    lam = ckpt.lambda_test if args.lambda_test is None else args.lambda_test
    pred = ckpt.model.predict(example, ckpt.vocab, mode="eval", lam=lam, threshold=args.sp_threshold)
    print(json.dumps({"id": example.id, **pred.to_dict()}, indent=1))
    return 0


def cmd_inspect_topology(args) -> int:
    examples = load_hotpot_json(args.data)
    example = _pick(examples, args)
    if args.checkpoint:
        vocab = load_checkpoint(args.checkpoint).vocab
    elif args.embeddings:
        vocab = load_pretrained_embeddings(args.embeddings, args.emb_dim)
    else:
        vocab = Vocabulary.random(corpus_tokens(examples), args.emb_dim, args.seed)
    lam = default_lambda(args.mode) if args.lam is None else args.lam
    _, topology = example_topology(example, vocab, lam)
    print(topology.to_json())
    return 0


def cmd_params(args) -> int:
    config = _config_from(args)
    report = count_params(GQAModel(config.model_config(), seed=config.seed))
    if args.json:
        print(json.dumps(report, indent=1))
    else:
        print(format_param_report(report))
    return 0


def cmd_show_config(args) -> int:
    sys.stdout.write(dumps_config(_config_from(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gqa", description="Graph-enriched multi-document QA.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic corpus as HotPotQA JSON")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab-size", type=int, default=40)
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint; prints the metric JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--lambda-test", type=float, default=None)
    p.add_argument("--sp-threshold", type=float, default=0.5)
    p.add_argument("--records", help="also write per-example records to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict one example; prints the Prediction JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    which = p.add_mutually_exclusive_group()
    which.add_argument("--id")
    which.add_argument("--index", type=int, default=0)
    p.add_argument("--lambda-test", type=float, default=None)
    p.add_argument("--sp-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect-topology", help="dump the adjacency matrices of one example")
    p.add_argument("--data", required=True)
    which = p.add_mutually_exclusive_group()
    which.add_argument("--id")
    which.add_argument("--index", type=int, default=0)
    p.add_argument("--checkpoint", help="take word vectors from this checkpoint")
    p.add_argument("--embeddings", help="take word vectors from this text file")
    p.add_argument("--emb-dim", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("train", "eval"), default="eval")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.set_defaults(func=cmd_inspect_topology)

    p = sub.add_parser("params", help="per-component trainable parameter counts")
    _add_config_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("show-config", help="print the effective training configuration")
    _add_config_flags(p)
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (GQAError, OSError) as exc:
        print(f"gqa {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
