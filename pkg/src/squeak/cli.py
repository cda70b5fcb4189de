"""Command-line entry point: ``squeak build | krr | validate``.

Exit codes: 0 success, 1 accuracy check failed, 2 configuration error,
3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import distributed, nystrom, sequential, validate
from .data import DataError, load
from .dictionary import DictionaryFormatError, deserialize, serialize
from .kernels import KernelError, KernelSpec
from .sequential import SqueakConfig

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="data file")
    p.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--header", action="store_true", help="CSV: skip the first row")
    p.add_argument("--labels", action="store_true", help="CSV: last column is the target")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squeak", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="sample a dictionary (sequential, or over a merge tree)")
    _add_data_args(b)
    b.add_argument("--kernel", choices=("gaussian", "linear", "polynomial"), default="gaussian")
    b.add_argument("--bandwidth", type=float, default=1.0)
    b.add_argument("--degree", type=int, default=2)
    b.add_argument("--offset", type=float, default=1.0)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--delta", type=float, default=0.5)
    qbar = b.add_mutually_exclusive_group(required=True)
    qbar.add_argument("--qbar", type=int, help="fixed multiplicity budget")
    qbar.add_argument("--qbar-auto", action="store_true", help="use the theorem value")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--tree", help="balanced, unbalanced, or a tree spec JSON file")
    b.add_argument("--leaves", type=int)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--no-halving-floor", action="store_true", help="plain min update of probabilities")
    b.add_argument("--out", required=True, help="dictionary JSON path; the report goes next to it")

    k = sub.add_parser("krr", help="fit kernel ridge regression on a dictionary")
    k.add_argument("--dict", required=True)
    _add_data_args(k)
    k.add_argument("--mu", type=float, required=True)
    k.add_argument("--out", required=True)

    v = sub.add_parser("validate", help="check a dictionary against the dense oracle")
    v.add_argument("--dict", required=True)
    _add_data_args(v)
    v.add_argument("--eps", type=float, help="accuracy target (default: the dictionary's epsilon)")
    v.add_argument("--suite", action="store_true", help="also run the randomized lemma suite")
    v.add_argument("--suite-instances", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    return parser


def _kernel(args) -> KernelSpec:
    if args.kernel == "gaussian":
        return KernelSpec.gaussian(args.bandwidth)
    if args.kernel == "linear":
        return KernelSpec.linear()
    return KernelSpec.polynomial(args.degree, args.offset)


def _load_data(args):
    return load(args.input, args.format, header=args.header, labels=args.labels)


def _load_dict(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return deserialize(raw)
    except DictionaryFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _tree(args) -> distributed.MergeTree:
    spec = args.tree
    if spec in ("balanced", "unbalanced"):
        if args.leaves is None:
            raise ConfigError("--tree balanced|unbalanced needs --leaves")
        return distributed.build_tree(args.leaves, spec)
    tree = distributed.MergeTree.load(spec) if Path(spec).is_file() else None
    if tree is None:
        raise ConfigError(f"--tree: {spec!r} is neither a shape nor a file")
    if args.leaves is not None and args.leaves != tree.k:
        raise ConfigError(f"--leaves {args.leaves} disagrees with k={tree.k} in {spec}")
    return tree


def cmd_build(args) -> int:
    if args.qbar is not None and args.qbar < 1:
        raise ConfigError("--qbar must be a positive integer")
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg = SqueakConfig(
        gamma=args.gamma, epsilon=args.eps, delta=args.delta, kernel=_kernel(args),
        q_bar_override=args.qbar, seed=args.seed, halving_floor=not args.no_halving_floor,
    )
    if args.qbar_auto and args.eps == 0:
        raise ConfigError("--qbar-auto needs --eps > 0")
    tree = None
    if args.tree is not None:
        tree = _tree(args)
    elif args.leaves is not None:
        raise ConfigError("--leaves only applies with --tree")
    data = _load_data(args)
    if tree is None:
        result = sequential.run(data, cfg)
    else:
        if tree.k > len(data):
            raise DataError(f"cannot split {len(data)} points into {tree.k} leaves")
        result = distributed.run(data, cfg, tree, workers=args.workers)
    report = result.to_json()
    report["input"] = str(args.input)
    out = Path(args.out)
    out.write_bytes(serialize(result.dictionary))
    out.with_name(out.stem + ".report.json").write_text(_dump(report))
    return EXIT_OK


def cmd_krr(args) -> int:
    d = _load_dict(args.dict)
    if not args.mu > 0:
        raise ConfigError("--mu must be positive")
    data = _load_data(args)
    if data.labels is None:
        raise DataError(f"{args.input}: kernel ridge regression needs labels (pass --labels for CSV)")
    model = nystrom.fit_krr(data, d, args.mu)
    Path(args.out).write_text(model.dumps())
    mse = nystrom.empirical_risk(nystrom.predict(model, data), data.labels)
    sys.stdout.write(_dump({"n": len(data), "support": int(model.support.size), "mu": args.mu, "train_mse": mse}))
    return EXIT_OK


def cmd_validate(args) -> int:
    d = _load_dict(args.dict)
    if args.eps is not None and not 0 < args.eps < 1:
        raise ConfigError("--eps must lie in (0, 1)")
    data = _load_data(args)
    report = validate.check_accuracy(data, d, epsilon=args.eps).to_json()
    report["seed"] = int(d.seed)
    ok = report["pass"]
    if args.suite:
        if args.suite_instances < 1:
            raise ConfigError("--suite-instances must be >= 1")
        suite = validate.lemma_suite(args.suite_instances, seed=args.seed)
        report["suite"] = suite
        ok = ok and suite["pass"]
    sys.stdout.write(_dump(report))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"build": cmd_build, "krr": cmd_krr, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, KernelError, distributed.TreeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
