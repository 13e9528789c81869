"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import synth
from ._backend import set_threads
from .config import RunConfig
from .errors import CGMMError, ConfigError, DataError
from .graph import read_dataset, validate_dataset, write_dataset
from .seeding import derive_seed
from .similarity import export_kernel_matrix, kernel_matrix
from .stack import (
    fingerprint_matrix,
    inspect_fingerprints,
    load_stack_file,
    save_stack_file,
    train_stack,
    write_fingerprint_csv,
    write_inspect_csv,
)
from .validation import cross_validate

log = logging.getLogger("cgmm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _open_input(path, reader):
    try:
        return reader(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except IsADirectoryError:
        raise DataError(f"is a directory: {path}") from None


def _load_config(path) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        try:
            cfg = RunConfig.from_file(path)
        except FileNotFoundError:
            raise ConfigError(f"no such config file: {path}") from None
    threads = set_threads(cfg.threads)
    log.info("resolved configuration (kernel threads in use: %d):\n%s", threads, cfg.format())
    return cfg


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    data = _open_input(args.dataset, read_dataset)
    best = None
    for c, stack_cfg in enumerate(cfg.grid()):
        stack = train_stack(data, stack_cfg, derive_seed(cfg.seed, "train", c))
        score = float(stack.log[-1]["score"])
        log.info("grid point %d (C=%d, layers=%s): depth %d, validation accuracy %.4f",
                 c, stack_cfg.C, stack_cfg.layers, stack.depth, score)
        if best is None or score > best[0]:
            best = (score, stack)
    stack = best[1]
    for event in stack.log:
        log.info("construction: %s", " ".join(f"{k}={v}" for k, v in event.items()))
    save_stack_file(stack, args.out)
    print(f"wrote {args.out}: {stack.depth} layers, C={stack.n_states}")
    return 0


def cmd_fingerprint(args) -> int:
    cfg = _load_config(args.config)
    stack = _open_input(args.model, load_stack_file)
    data = _open_input(args.dataset, read_dataset)
    X = fingerprint_matrix(stack, data, cfg.fingerprint, args.layers)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_fingerprint_csv(data, X, fh)
    if args.kernel_out:
        km = kernel_matrix(X, [g.id for g in data], cfg.kernel, cfg.gamma)
        with open(args.kernel_out, "w", encoding="utf-8", newline="\n") as fh:
            export_kernel_matrix(km, fh)
    print(f"wrote {len(X)} fingerprints of length {X.shape[1]} to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    data = _open_input(args.dataset, read_dataset)
    scheme = args.scheme or cfg.cv
    grid = cfg.grid()
    result = cross_validate(data, grid, scheme, cfg.seed)
    for k, (acc, depth, sel) in enumerate(zip(result.fold_accuracies, result.depths, result.selected)):
        log.info("fold %d: accuracy %.4f depth %d config %d", k, acc, depth, sel)
    print(f"{scheme} accuracy: {result.format()}  depths: {','.join(map(str, result.depths))}")
    return 0


def cmd_inspect(args) -> int:
    stack = _open_input(args.model, load_stack_file)
    data = _open_input(args.dataset, read_dataset)
    rows = inspect_fingerprints(stack, data)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_inspect_csv(rows, fh)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_synth(args) -> int:
    if args.kind == "two_hop":
        data = synth.gen_two_hop(args.n, args.seed)
    elif args.kind == "random":
        data = synth.gen_random_graphs(args.n, (args.min_v, args.max_v), args.edge_prob,
                                       args.M, args.A, args.seed)
    else:
        lengths = np.random.default_rng(args.seed).integers(args.min_v, args.max_v + 1, size=args.n)
        data = synth.gen_cycles(lengths.tolist(), args.seed, args.undirected, args.M)
    write_dataset(data, args.out)
    print(f"wrote {len(data)} graphs to {args.out}")
    return 0


def cmd_validate(args) -> int:
    data = _open_input(args.dataset, read_dataset)
    problems = validate_dataset(data)
    for p in problems:
        print(p)
    if problems:
        return 2
    print(f"{args.dataset}: {len(data)} graphs, M={data.M}, A={data.A}, ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cgmm", description="Contextual Graph Markov Model toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a layer stack and write a model file")
    p.add_argument("dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fingerprint", help="export fingerprints (and optionally a kernel matrix)")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--layers", choices=("all", "last"), default="all")
    p.add_argument("--kernel-out")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("eval", help="cross-validated accuracy")
    p.add_argument("dataset")
    p.add_argument("--config")
    p.add_argument("--scheme", choices=("tenfold", "nested"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="per-class mean fingerprints as CSV")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("kind", choices=("two_hop", "random", "cycles"))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=50, help="graphs per class (two_hop) or graph count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-v", type=int, default=3)
    p.add_argument("--max-v", type=int, default=10)
    p.add_argument("--edge-prob", type=float, default=0.2)
    p.add_argument("--M", type=int, default=3)
    p.add_argument("--A", type=int, default=2)
    p.add_argument("--undirected", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="check a dataset file")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CGMMError as exc:
        print(f"cgmm: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"cgmm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
