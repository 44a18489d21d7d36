"""Command-line entry point wiring the pipeline stages to subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .pipeline import (PipelineInputs, PipelinePaths, run_pipeline,
                       stage_baseline, stage_calibrate, stage_classify,
                       stage_detect, stage_evaluate, stage_label, stage_mir,
                       stage_train)
from .records import parse_tweet_stream
from .synth import generate_synthetic, standard_scenario
from .text import default_stopwords, load_stopwords, rake_keywords

logger = logging.getLogger(__name__)

STAGE_NAMES = ("calibrate", "detect", "label", "train", "classify",
               "evaluate", "mir", "baseline")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (INI)")
    common.add_argument("--data", help="input directory (default: --out)")
    common.add_argument("--out", default=".", help="artifact directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument(
        "--multiplier", action="append", type=float, dest="multipliers",
        help="jitter threshold multiplier; repeatable (default: config)",
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="marketburst",
        description="Burst event detection with market-impact classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_NAMES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("run", parents=[common], help="run every stage in order")

    synth = sub.add_parser("synth", parents=[common],
                           help="generate a synthetic data set")
    synth.add_argument("--days", type=int, default=14)

    keywords = sub.add_parser("keywords", parents=[common],
                              help="extract corpus keywords")
    keywords.add_argument("--top", type=int, default=30)
    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    path = args.config
    if path is None:
        implicit = Path(args.out) / "config.ini"
        path = str(implicit) if implicit.is_file() else None
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(path, **overrides)


def _cmd_synth(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    scenario = standard_scenario(seed)
    if args.days != scenario.days:
        raise SystemExit("only the stock 14-day scenario is scripted; "
                         "build a custom SyntheticScenario for other spans")
    info = generate_synthetic(args.out, scenario)
    print(json.dumps(info, indent=2))
    return 0


def _cmd_keywords(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    data_dir = Path(args.data or args.out)
    records = parse_tweet_stream(data_dir / cfg.tweets)
    stop = (load_stopwords(data_dir / cfg.stopwords) if cfg.stopwords
            else default_stopwords())
    document = " . ".join(r.text for r in records)
    found = rake_keywords(
        document,
        max_words_per_keyword=cfg.keyword_max_words,
        min_occurrences=cfg.keyword_min_occurrences,
        min_score=cfg.keyword_min_score,
        stopwords=stop,
    )
    for kw in found[: args.top]:
        print(f"{kw.score:8.3f}  {kw.occurrences:6d}  {kw.phrase}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "synth":
        return _cmd_synth(args)

    cfg = _load_config(args)
    if args.command == "keywords":
        return _cmd_keywords(args, cfg)

    data_dir = Path(args.data or args.out)
    out_dir = Path(args.out)
    mults = tuple(args.multipliers) if args.multipliers else cfg.multipliers

    if args.command == "run":
        summary = run_pipeline(cfg, data_dir, out_dir, mults)
        for tag, entry in summary["multipliers"].items():
            det, base = entry["detector"], entry["baseline"]
            print(f"multiplier {tag}: f1={det['f1']:.3f} auc={det['auc']:.3f} "
                  f"mir={det['mir_bits']:.4f}b "
                  f"(sentiment baseline mir={base['mir_bits']:.4f}b)")
        print(f"summary: {PipelinePaths(out_dir).summary}")
        return 0

    paths = PipelinePaths(out_dir)
    paths.out_dir.mkdir(parents=True, exist_ok=True)
    inputs = PipelineInputs.load(cfg, data_dir)
    if args.command == "calibrate":
        print(json.dumps(stage_calibrate(inputs, paths), indent=2))
    elif args.command == "detect":
        print(f"wrote {len(stage_detect(inputs, paths))} vectors "
              f"to {paths.events}")
    elif args.command == "label":
        for m in mults:
            tr, ev = stage_label(inputs, paths, data_dir, m)
            print(f"multiplier {m:g}: {len(tr)} train / {len(ev)} eval rows")
    elif args.command == "train":
        for m in mults:
            bundle = stage_train(inputs, paths, m)
            print(f"multiplier {m:g}: cv={bundle.meta['cv']}")
    elif args.command == "classify":
        for m in mults:
            rows = stage_classify(inputs, paths, m)
            print(f"multiplier {m:g}: {len(rows)} predictions")
    elif args.command == "evaluate":
        for m in mults:
            print(json.dumps(stage_evaluate(inputs, paths, data_dir, m),
                             indent=2))
    elif args.command == "mir":
        for m in mults:
            print(json.dumps(stage_mir(inputs, paths, data_dir, m), indent=2))
    elif args.command == "baseline":
        for m in mults:
            print(json.dumps(stage_baseline(inputs, paths, data_dir, m),
                             indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
