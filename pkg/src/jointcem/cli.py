"""Command-line entry point: gen-data, label, train, eval, rescore.

Exit codes: 0 success, 2 usage / config / schema error, 3 numerical failure.
Every command writes a ``manifest.json`` into ``--out`` before doing work.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .alignment import align_words, dump_jsonl, wp_to_words
from .cem.config import CemConfig, ConfigError, load_config
from .cem.model import CemModel
from .cem.rescoring import (
    SCORE_CHOICES,
    constant_scorer,
    oracle_scorer,
    precompute_scores,
    rescore_corpus,
    table_scorer,
)
from .cem.training import TrainingDiverged, train
from .datagen import ChannelConfig, gen_corpus, load_corpus
from .evaluation import evaluate
from .metrics import AVAILABLE_SCORES, MetricError
from .nn import checkpoint

log = logging.getLogger("jointcem")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
VARIANTS = ("W", "U", "WD", "WU", "WUD")


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def write_manifest(out: Path, command: str, config: dict, seeds: dict,
                   inputs: dict[str, str | None], outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {
            name: None if p is None else {"path": str(p), "sha256": _sha256(Path(p))}
            for name, p in inputs.items()
        },
        "outputs": [str(out / o) for o in outputs],
        "version": __version__,
    }
    _write_json(out / "manifest.json", manifest)


def _config_sections(path: str | None) -> dict:
    if path is None:
        return {}
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    return load_config(path)


def _model_config(args) -> CemConfig:
    data = dict(_config_sections(args.config).get("model") or {})
    if args.variant:
        data["variant"] = args.variant
    if args.seed is not None:
        data["seed"] = args.seed
    return CemConfig.from_dict(data)


def _channel_config(args) -> ChannelConfig:
    data = dict(_config_sections(args.config).get("channel") or {})
    known = {f.name for f in fields(ChannelConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown channel key(s): {sorted(unknown)}")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.n_utterances is not None:
        data["n_utterances"] = args.n_utterances
    return ChannelConfig(**data)


def _load_dataset(path: str | None):
    if path is None:
        raise UsageError("--dataset is required")
    if not Path(path).exists():
        raise UsageError(f"dataset not found: {path}")
    utts = load_corpus(path)
    if not utts:
        raise UsageError(f"dataset {path} is empty")
    return utts


def _load_model(args) -> CemModel | None:
    if args.checkpoint is None:
        return None
    if not Path(args.checkpoint).exists():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    params, meta = checkpoint.load(args.checkpoint)
    return CemModel.from_checkpoint(params, meta)


def _resolve_variant(args, model: CemModel | None) -> str:
    if model is not None:
        if args.variant and args.variant != model.config.variant:
            raise UsageError(f"--variant {args.variant} does not match checkpoint variant {model.config.variant}")
        return model.config.variant
    if args.oracle and args.variant:
        return args.variant
    raise UsageError("--checkpoint is required (or --oracle with --variant)")


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _channel_config(args)
    out = _out_dir(args)
    write_manifest(out, "gen-data", {"channel": cfg.__dict__}, {"channel": cfg.seed},
                   {"config": args.config}, ["dataset.jsonl"])
    gen_corpus(cfg, out / "dataset.jsonl", inline_acoustic=args.inline_acoustic)
    print(out / "dataset.jsonl")
    return EXIT_OK


def cmd_label(args) -> int:
    utts = _load_dataset(args.dataset)
    out = _out_dir(args)
    write_manifest(out, "label", {}, {}, {"dataset": args.dataset}, ["labels.jsonl"])
    records = []
    for utt in utts:
        for hyp in utt.hypotheses:
            labels = align_words(wp_to_words(hyp.wp_tokens).words, utt.reference)
            records.append(labels.to_record(utt.utterance_id, hyp.beam_rank))
    path = out / "labels.jsonl"
    tmp = path.with_suffix(".jsonl.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        dump_jsonl(records, fh)
    os.replace(tmp, path)
    print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _model_config(args)
    utts = _load_dataset(args.dataset)
    out = _out_dir(args)
    write_manifest(out, "train", {"model": cfg.to_dict()}, {"model": cfg.seed},
                   {"config": args.config, "dataset": args.dataset},
                   ["model.ckpt", "train_log.jsonl"])
    result = train(utts, cfg, verbose=args.verbose)
    checkpoint.save(out / "model.ckpt", result.model.params, result.model.meta())
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as fh:
        dump_jsonl(result.log, fh)
    print(out / "model.ckpt")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args)
    variant = _resolve_variant(args, model)
    utts = _load_dataset(args.dataset)
    out = _out_dir(args)
    if args.select_by and args.select_by not in AVAILABLE_SCORES[variant]:
        raise UsageError(f"score {args.select_by!r} unavailable for variant {variant}")
    write_manifest(out, "eval", {"variant": variant, "oracle": args.oracle, "select_by": args.select_by},
                   {}, {"checkpoint": args.checkpoint, "dataset": args.dataset}, ["report.json"])
    report = evaluate(utts, variant, model, oracle=args.oracle,
                      select_by=None if args.oracle else args.select_by)
    _write_json(out / "report.json", report.to_dict())
    print(json.dumps({"word": report.word, "utterance": report.utterance}, sort_keys=True))
    return EXIT_OK


def cmd_rescore(args) -> int:
    model = _load_model(args)
    utts = _load_dataset(args.dataset)
    out = _out_dir(args)
    if args.oracle:
        scorer, variant = oracle_scorer, "oracle"
    elif args.constant:
        scorer, variant = constant_scorer, "constant"
    else:
        variant = _resolve_variant(args, model)
        if args.score not in AVAILABLE_SCORES[variant]:
            raise UsageError(f"score {args.score!r} unavailable for variant {variant}")
        scorer = table_scorer(precompute_scores(model, utts, args.score))
    write_manifest(out, "rescore", {"score": args.score, "mode": variant}, {},
                   {"checkpoint": args.checkpoint, "dataset": args.dataset}, ["rescore.json"])
    result = rescore_corpus(utts, scorer)
    payload = dict(result.to_dict(), score=args.score, mode=variant)
    _write_json(out / "rescore.json", payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointcem", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", help="YAML/JSON config with 'model' and 'channel' sections")
        if dataset:
            p.add_argument("--dataset", help="dataset JSONL")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--variant", choices=VARIANTS)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    common(p, dataset=False)
    p.add_argument("--n-utterances", type=int)
    p.add_argument("--inline-acoustic", action="store_true", help="store frames instead of a recipe")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("label", help="write alignment labels for every hypothesis")
    common(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="train a confidence model")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="confidence metrics on the top hypothesis")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--oracle", action="store_true", help="use the true labels as confidences")
    p.add_argument("--select-by", choices=SCORE_CHOICES,
                   help="evaluate the rescored hypothesis instead of the beam top")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rescore", help="n-best rescoring WER")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--score", choices=SCORE_CHOICES, default="utt")
    p.add_argument("--oracle", action="store_true", help="rescore with the true 1 - WER")
    p.add_argument("--constant", action="store_true", help="rescore with a constant score")
    p.set_defaults(func=cmd_rescore)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, MetricError, checkpoint.CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
