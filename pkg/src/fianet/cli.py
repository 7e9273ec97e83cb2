"""Command-line entry points: parse, synth, train, eval, infer, ablate."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig
from .lexicon import (CategoryLexicon, SpatialLexicon, default_spatial_lexicon,
                      synthetic_category_lexicon)


def _add_parse(sub):
    p = sub.add_parser("parse", help="decompose a JSONL expression corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--categories", required=True)
    p.add_argument("--spatial", default=None)
    p.add_argument("--output", required=True)


def _add_synth(sub):
    p = sub.add_parser("synth", help="generate a synthetic triplet split")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--canvas", type=int, default=96)


def _add_train(sub):
    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--save-masks", action="store_true")


def _add_infer(sub):
    p = sub.add_parser("infer", help="segment one image given an expression")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--categories", default=None)
    p.add_argument("--spatial", default=None)


def _add_ablate(sub):
    p = sub.add_parser("ablate", help="run an ablation axis and emit a table")
    p.add_argument("--config", required=True)
    p.add_argument("--axes", required=True,
                   help="'fiam,tmem' or 'fiam_design'")
    p.add_argument("--out", required=True)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(prog="fianet")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_parse, _add_synth, _add_train, _add_eval, _add_infer,
                _add_ablate):
        add(sub)
    args = parser.parse_args(argv)

    if args.command == "parse":
        from .parsing import decompose_corpus
        cat_lex = CategoryLexicon.from_file(args.categories)
        spa_lex = (SpatialLexicon.from_file(args.spatial) if args.spatial
                   else default_spatial_lexicon())
        summary = decompose_corpus(args.input, cat_lex, spa_lex, args.output)
        print(f"written={summary['written']} skipped={summary['skipped']}")
        return 1 if summary["skipped"] else 0

    if args.command == "synth":
        from .synth import generate_split
        n = generate_split(args.n, args.seed, args.out, canvas=args.canvas)
        print(f"generated {n} triplets under {args.out}")
        return 0

    if args.command == "train":
        from .harness import train
        ckpt_dir = train(RunConfig.from_file(args.config), args.out)
        print(f"checkpoints under {ckpt_dir}")
        return 0

    if args.command == "eval":
        from .harness import evaluate
        from .metrics import report_table
        report = evaluate(args.ckpt, args.data, args.out,
                          save_masks=args.save_masks)
        print(report_table(report), end="")
        return 0

    if args.command == "infer":
        from .harness import infer
        cat_lex = (CategoryLexicon.from_file(args.categories)
                   if args.categories else synthetic_category_lexicon())
        spa_lex = (SpatialLexicon.from_file(args.spatial) if args.spatial
                   else default_spatial_lexicon())
        infer(args.ckpt, args.image, args.text, args.out,
              cat_lex=cat_lex, spa_lex=spa_lex)
        print(f"mask and overlay written to {args.out}")
        return 0

    if args.command == "ablate":
        from .harness import ablate
        table = ablate(RunConfig.from_file(args.config), args.axes, args.out)
        print(table, end="")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
