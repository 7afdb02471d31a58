"""Command-line entry point: train, eval, predict, generate, gradcheck.

Exit status 0 on success, 2 for bad configuration or input files,
3 for numeric failures (non-finite loss, failed gradient check).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, coerce, load_config, parse_config_text, save_config
from .decoders import POOLING_MODES
from .encoder import SequenceTooLongError
from .layers import FUSION_MODES, NumericError
from .schema import CorpusParseError, EventSchema, SchemaValidationError, load_corpus, save_corpus

log = logging.getLogger("cascade_events")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
REPORT_FILES = {"all": "report_overall.json", "overlap": "report_overlap.json", "normal": "report_normal.json"}


class InputError(Exception):
    pass


def _run_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--seed", type=int)
    for i in range(1, 6):
        p.add_argument(f"--threshold-{i}", type=float, dest=f"threshold_{i}")
    p.add_argument("--fusion", choices=FUSION_MODES)
    p.add_argument("--pooling", choices=POOLING_MODES)
    p.add_argument("--no-self-attention", dest="self_attention", action="store_false", default=None)
    p.add_argument("--no-position-embedding", dest="position_embedding", action="store_false", default=None)
    p.add_argument("--no-indicator", dest="indicator", action="store_false", default=None)
    p.add_argument("--strict-roles", dest="strict_roles", action="store_true", default=None)
    p.add_argument("--schema")
    p.add_argument("--checkpoint")
    p.add_argument("--output")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascade-events", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _run_flags()

    p = sub.add_parser("train", parents=[flags], help="train a model; writes checkpoint, history, config snapshot")
    p.add_argument("--train")
    p.add_argument("--dev")

    p = sub.add_parser("eval", parents=[flags], help="score predictions (or a checkpoint) against gold")
    p.add_argument("--gold", dest="test")
    p.add_argument("--predictions", help="prediction file; when absent the checkpoint is decoded")
    p.add_argument("--strict-arguments", action="store_true", help="AI also requires the trigger span")

    p = sub.add_parser("predict", parents=[flags], help="decode a corpus with a checkpoint")
    p.add_argument("--input", dest="test")
    p.add_argument("--drop-empty", action="store_true", help="omit events that have no arguments")

    p = sub.add_parser("generate", help="write a synthetic corpus and its schema")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="generator config key")
    p.add_argument("--seed", type=int)
    p.add_argument("--splits", help="train,dev,test sizes; default writes one corpus.jsonl")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks per component")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", action="append", help="restrict to named checks")
    p.add_argument("--corrupt-gradient", action="store_true", help="inject a wrong gradient; must fail")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args: argparse.Namespace, base: dict | None = None) -> dict:
    values = dict(base or {})
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = coerce(RunConfig, key.strip(), raw)
    names = ["seed", "fusion", "pooling", "self_attention", "position_embedding", "indicator", "strict_roles",
             "schema", "checkpoint", "output", "train", "dev", "test"]
    names += [f"threshold_{i}" for i in range(1, 6)]
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return values


def run_config(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    if args.config and not Path(args.config).exists():
        raise InputError(f"config file {args.config!r} does not exist")
    file_values = parse_config_text(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    return RunConfig.from_dict({**(base or {}), **file_values, **_overrides(args)})


def _schema(cfg: RunConfig) -> EventSchema:
    cfg.check_paths("schema")
    return EventSchema.load(cfg.schema)


def cmd_train(args) -> int:
    from .encoder import Vocabulary
    from .training import train

    cfg = run_config(args)
    cfg.check_paths("schema", "train")
    if cfg.dev:
        cfg.check_paths("dev")
    if not cfg.output:
        raise ConfigError("output directory is required", "output")
    schema = _schema(cfg)
    tc = cfg.train_config()
    train_corpus = load_corpus(cfg.train, schema, tc.max_len)
    dev_corpus = load_corpus(cfg.dev, schema, tc.max_len) if cfg.dev else None
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = Path(cfg.checkpoint) if cfg.checkpoint else out / "model.pt"
    save_config(cfg, out / "config.txt")
    vocab = Vocabulary.build(s.tokens for s in train_corpus.sentences)
    vocab.save(out / "vocab.txt")
    result = train(tc, train_corpus, dev_corpus, vocab, checkpoint, out / "history.jsonl",
                   log_every=50 if args.verbose else 0)
    print(f"trained {len(result.history)} epochs; best epoch {result.best_epoch}; checkpoint {checkpoint}")
    return EXIT_OK


def _load_model(cfg: RunConfig, schema: EventSchema):
    from .training import load_checkpoint

    cfg.check_paths("checkpoint")
    return load_checkpoint(cfg.checkpoint, schema)


def _checkpoint_base(args) -> dict:
    """Config stored in the checkpoint, so decoding defaults match training."""
    from .training import load_checkpoint

    path = args.checkpoint
    if path is None and args.config and Path(args.config).exists():
        path = load_config(args.config, RunConfig).checkpoint or None
    if path and Path(path).exists():
        return load_checkpoint(path).config.to_dict()
    return {}


def cmd_predict(args) -> int:
    from .inference import predict_corpus, save_predictions

    cfg = run_config(args, _checkpoint_base(args))
    cfg.check_paths("test")
    if not cfg.output:
        raise ConfigError("output file is required", "output")
    schema = _schema(cfg)
    model = _load_model(cfg, schema)
    corpus = load_corpus(cfg.test, schema, model.max_len)
    preds = predict_corpus(model, corpus, cfg.thresholds, cfg.strict_roles, drop_empty=args.drop_empty)
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_predictions(preds, out)
    save_config(cfg, out.with_name(out.stem + ".config.txt"))
    print(f"wrote {sum(len(s.events) for s in preds)} events for {len(preds)} sentences to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import score

    cfg = run_config(args, {} if args.predictions else _checkpoint_base(args))
    cfg.check_paths("test")
    schema = _schema(cfg)
    gold = load_corpus(cfg.test, schema)
    if args.predictions:
        if not Path(args.predictions).exists():
            raise InputError(f"predictions file {args.predictions!r} does not exist")
        preds = load_corpus(args.predictions, schema).sentences
    else:
        from .inference import predict_corpus

        model = _load_model(cfg, schema)
        preds = predict_corpus(model, gold, cfg.thresholds, cfg.strict_roles)
    report = score(preds, gold, strict_arguments=args.strict_arguments)
    print(report.table())
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        for group, name in REPORT_FILES.items():
            (out / name).write_text(json.dumps(report.group_dict(group), indent=2) + "\n", encoding="utf-8")
        report.save(out / "report.json")
        save_config(cfg, out / "config.txt")
    return EXIT_OK


def cmd_generate(args) -> int:
    from .synthetic import GeneratorConfig, SyntheticCorpusGenerator, generate_splits

    known = GeneratorConfig.__dataclass_fields__
    values = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = (x.strip() for x in item.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown generator key {key!r}", key)
        if key == "mix":
            values[key] = tuple(float(x) for x in raw.split(","))
        else:
            try:
                values[key] = type(getattr(GeneratorConfig(), key))(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value {raw!r} for {key}", key) from exc
    if args.seed is not None:
        values["seed"] = args.seed
    gcfg = GeneratorConfig(**values)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if args.splits:
        try:
            sizes = tuple(int(x) for x in args.splits.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --splits {args.splits!r}", "splits") from exc
        if len(sizes) != 3:
            raise ConfigError("--splits needs three sizes", "splits")
        parts = generate_splits(gcfg, sizes)
        for name, part in zip(("train", "dev", "test"), parts):
            save_corpus(part, out / f"{name}.jsonl")
        schema = parts[0].schema
    else:
        corpus = SyntheticCorpusGenerator(gcfg).generate_labeled()[0]
        save_corpus(corpus, out / "corpus.jsonl")
        schema = corpus.schema
    schema.save(out / "schema.json")
    snapshot = {k: (",".join(map(str, v)) if isinstance(v, tuple) else v) for k, v in gcfg.__dict__.items()}
    (out / "generator.txt").write_text("".join(f"{k} = {v}\n" for k, v in snapshot.items()), encoding="utf-8")
    print(f"wrote synthetic corpus to {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import CHECKS, run_grad_checks

    for name in args.only or []:
        if name not in CHECKS:
            raise ConfigError(f"unknown check {name!r}; choose from {sorted(CHECKS)}", name)
    results = run_grad_checks(args.seed, args.corrupt_gradient, args.only)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:<24} max rel error {r.error:.3e} (tol {r.tolerance:g})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "generate": cmd_generate, "gradcheck": cmd_gradcheck}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        key = f" [key: {exc.key}]" if exc.key else ""
        print(f"error: {exc}{key}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, FileNotFoundError, CorpusParseError, SchemaValidationError,
            SequenceTooLongError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
