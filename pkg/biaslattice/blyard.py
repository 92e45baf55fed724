#!/usr/bin/env python3

import sys
import argparse

from biaslattice.blinit import start_framework
from biaslattice.lib.logging import log_failure


def version_check():
    required = (3, 11)
    this = (sys.version_info.major, sys.version_info.minor)
    if this < required:
        log_failure("Invalid Python version for using biaslattice: need at least 3.11")
        sys.exit(1)


def _common(p):
    p.add_argument("-d", "--debug", help="Turn on debug logging output.",
        dest="debug", action="store_true", default=False)
    p.add_argument("-l", "--logfile", help="Specify the name of a file to send"
        " log entries to (default is to send log to stdout/stderr).",
        dest="logfile", default=None, type=str)
    p.add_argument("-c", "--config", metavar="CONFIG", default=None,
        help="TOML or JSON config file; flags override its values.")
    p.add_argument("--seed", type=int, default=None,
        help="Seed for this run (BIASLATTICE_SEED overrides it).")


def build_parser():
    progname = "biaslattice"
    parser = argparse.ArgumentParser(prog=progname,
        description="Contextual adapters and shallow fusion for a desk-scale neural transducer.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("gen-data", help="Generate the synthetic corpus.")
    _common(p)
    p.add_argument("--out", required=True, metavar="DATADIR", help="Output directory.")

    p = sub.add_parser("pretrain", help="Pretrain the base transducer on general data.")
    _common(p)
    p.add_argument("--data", required=True, metavar="DATADIR")
    p.add_argument("--out", required=True, metavar="CKPT")
    p.add_argument("--epochs", type=int, default=None, help="Maximum number of epochs.")

    p = sub.add_parser("train-adapters", help="Train contextual adapters on the mixed set.")
    _common(p)
    p.add_argument("--base", required=True, metavar="CKPT")
    p.add_argument("--data", required=True, metavar="DATADIR")
    p.add_argument("--out", required=True, metavar="CKPT2")
    p.add_argument("--out-base", default=None, metavar="CKPT",
        help="Where full-finetune writes the updated base (default: CKPT2-base).")
    p.add_argument("--variant", choices=['enc', 'pred', 'enc-pred', 'joint'], default=None)
    p.add_argument("--mode", choices=['adapter', 'full-finetune'], default='adapter')
    p.add_argument("--no-types", dest="no_types", action="store_true", default=False,
        help="Train without entity type embeddings.")
    p.add_argument("--types", dest="types", action="store_true", default=False,
        help="Train with entity type embeddings.")
    p.add_argument("--no-nobias", dest="no_nobias", action="store_true", default=False,
        help="Drop the <no_bias> catalog row.")
    p.add_argument("--catalog-size", type=int, default=None, dest="catalog_size")
    p.add_argument("--train-fraction", type=float, default=None, dest="train_fraction")
    p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("decode", help="Decode a dataset to an n-best list.")
    _common(p)
    p.add_argument("--base", required=True, metavar="CKPT")
    p.add_argument("--adapters", default=None, metavar="CKPT2")
    p.add_argument("--in", required=True, dest="infile", metavar="DATASET")
    p.add_argument("--out", required=True, metavar="NBEST")
    p.add_argument("--catalog", default=None, metavar="FILE",
        help="Fixed catalog (JSON lines) for every utterance.")
    p.add_argument("--lexicons", default=None, metavar="DATADIR",
        help="Sample a catalog per utterance from this corpus's lexicons.")
    p.add_argument("--catalog-size", type=int, default=None, dest="catalog_size")
    p.add_argument("--random-catalog", action="store_true", default=None, dest="random_catalog")
    p.add_argument("--types", default=None, help="Comma-separated entity types to keep in catalogs.")
    p.add_argument("--sf-lambda", type=float, default=None, dest="sf_lambda")
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--greedy", action="store_true", default=None)
    p.add_argument("--dump-attention", default=None, dest="dump_attention", metavar="FILE")

    p = sub.add_parser("eval", help="Score an n-best list against references.")
    _common(p)
    p.add_argument("--refs", required=True, metavar="DATASET")
    p.add_argument("--hyps", required=True, metavar="NBEST")
    p.add_argument("--baseline", default=None, metavar="REPORT")
    p.add_argument("--out", required=True, metavar="REPORT")
    p.add_argument("--name", default=None)
    p.add_argument("--vocab", default=None, metavar="VOCAB",
        help="Vocab file (default: vocab.json next to the references).")

    p = sub.add_parser("sweep", help="Run an experiment spec.")
    _common(p)
    p.add_argument("--spec", required=True, metavar="EXP_TOML")
    p.add_argument("--jobs", type=int, default=None, help="Worker processes (default: physical cores).")

    p = sub.add_parser("census", help="Print the parameter census.")
    _common(p)
    p.add_argument("--base", required=True, metavar="CKPT")
    p.add_argument("--adapters", default=None, metavar="CKPT2")
    return parser


def main(argv=None):
    version_check()
    parser = build_parser()
    args = parser.parse_args(argv)
    sys.exit(start_framework(args, sys.argv if argv is None else argv))


if __name__ == '__main__':
    main()
