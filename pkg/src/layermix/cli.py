"""Command-line entry point.

Subcommands: ``gen-fixtures``, ``train``, ``compare``, ``inspect``.
Exit codes are a stable contract: 0 success, 2 configuration error, 3 I/O or
file-format error, 4 numerical failure (non-finite loss), 5 partial failure
(some seed runs failed; a partial report is still written).

All randomness flows from seeds in the config or flags; the wall clock only
ever shows up in timing fields.  ``LAYERMIX_LOG=error|warn|info|debug``
controls logging verbosity and nothing else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import harness, jsonfmt, synth
from .embedstore import (
    MAGIC,
    AlignError,
    ConllParseError,
    MlebError,
    load_conll,
    load_embeddings,
)
from .errors import ConfigError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_PARTIAL = 5

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _configure_logging() -> None:
    name = os.environ.get("LAYERMIX_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(name, logging.WARNING))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layermix",
        description="Train and compare layer-combination schemes for a BiLSTM-CRF tagger.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-fixtures", help="generate a synthetic dataset")
    gen.add_argument("--config", required=True, help="fixture spec JSON")
    gen.add_argument("--out", required=True, help="output directory")

    train = sub.add_parser("train", help="train one (scheme, seed) run")
    train.add_argument("--config", required=True, help="experiment config JSON")
    train.add_argument("--scheme", help="override the config's mixing scheme")
    train.add_argument("--seed", type=int, help="override the seed (default: first in config)")
    train.add_argument("--out", required=True, help="run result JSON path")

    compare = sub.add_parser("compare", help="train several schemes and test significance")
    compare.add_argument("--config", required=True, help="experiment config JSON")
    compare.add_argument(
        "--schemes",
        required=True,
        help="comma-separated scheme list; commas inside wavg:... are recognized "
        "(e.g. 'layer:1,wavg:0,1' is two schemes)",
    )
    compare.add_argument("--seeds", help="comma-separated seed list override")
    compare.add_argument("--jobs", type=int, default=1, help="concurrent seed runs (default 1)")
    compare.add_argument("--out", help="report JSON path (default: print to stdout)")

    inspect = sub.add_parser("inspect", help="summarize an MLEB or CoNLL file")
    inspect.add_argument("path")
    return parser


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return data


def cmd_gen_fixtures(args) -> int:
    spec = synth.SynthSpec.from_dict(_load_json(args.config))
    data = synth.generate(spec)
    for path, summary in synth.write_fixtures(data, args.out):
        print(f"wrote {path}: {summary}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = harness.ExperimentConfig.from_json(args.config)
    if args.scheme is not None:
        config = harness.scheme_config(config, args.scheme)
    seed = args.seed if args.seed is not None else config.seeds[0]
    result = harness.train_one(config, seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(jsonfmt.dumps(result.to_json_obj()))
    print(f"wrote {args.out}: scheme={result.scheme} seed={seed} test={result.test_score:.4f}")
    return EXIT_OK


def format_table(report: harness.ComparisonReport) -> str:
    """One row per scheme, mirroring the report JSON fields."""
    headers = ["scheme", "mean", "std", "spread", "p_vs_best", "worse"]
    rows = [headers]
    for block in report.to_json_obj()["schemes"]:
        rows.append(
            [
                block["scheme"],
                f"{block['mean']:.4f}",
                f"{block['std']:.4f}",
                f"{block['spread']:.4f}",
                "-" if block["p_vs_best"] is None else f"{block['p_vs_best']:.3g}",
                "*" if block["significantly_worse"] else "",
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)


def _emit_report(report: harness.ComparisonReport, out_path: str | None) -> None:
    print(format_table(report))
    text = report.to_json()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {out_path}")
    else:
        print(text, end="")


def split_scheme_list(text: str) -> list[str]:
    """Split a scheme CSV, keeping commas that belong to a wavg layer list.

    A bare integer is never a scheme name, so it can only continue the layer
    list of the preceding wavg entry: "layer:1,wavg:0,1" -> two schemes.
    """
    names: list[str] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ConfigError(f"empty entry in scheme list {text!r}")
        if names and names[-1].startswith("wavg:") and part.isdigit():
            names[-1] += "," + part
        else:
            names.append(part)
    return names


def cmd_compare(args) -> int:
    base = harness.ExperimentConfig.from_json(args.config)
    if args.seeds is not None:
        try:
            base.seeds = [int(part) for part in args.seeds.split(",")]
        except ValueError:
            raise ConfigError(f"bad --seeds list {args.seeds!r}") from None
        base.validate()
    names = split_scheme_list(args.schemes)
    if len(names) < 2:
        raise ConfigError("--schemes needs at least two comma-separated schemes")
    configs = [harness.scheme_config(base, name) for name in names]
    try:
        report = harness.compare_schemes(configs, jobs=args.jobs)
    except harness.MultiSeedError as exc:
        for seed, message in exc.failures:
            print(f"seed {seed} failed: {message}", file=sys.stderr)
        _emit_report(exc.partial_report, args.out)
        return EXIT_PARTIAL
    _emit_report(report, args.out)
    return EXIT_OK


def cmd_inspect(args) -> int:
    with open(args.path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        dataset = load_embeddings(args.path)
        print(
            f"layers={dataset.num_layers} dim={dataset.dim} "
            f"sentences={len(dataset.sentences)} tokens={dataset.num_tokens}"
        )
    else:
        corpus = load_conll(args.path, scheme="PLAIN")
        print(
            f"sentences={len(corpus.sentences)} tokens={corpus.num_tokens} "
            f"tagset={','.join(corpus.tagset)}"
        )
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {
        "gen-fixtures": cmd_gen_fixtures,
        "train": cmd_train,
        "compare": cmd_compare,
        "inspect": cmd_inspect,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MlebError, ConllParseError, AlignError, UnicodeDecodeError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())
