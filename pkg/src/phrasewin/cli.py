"""Command line entry point: ``phrasewin <command> ...``.

Exit status is 0 on success, 1 on an operational failure (message on
stderr) and 2 on a usage error. ``PW_LOG=quiet|info|debug`` sets verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from phrasewin.annotation import AnnotationError, parse_annotation, serialize_annotation
from phrasewin.corpus import (
    Corpus,
    EmptyCorpus,
    SynthGrammar,
    check_line,
    default_grammar,
    generate_synthetic,
    load_corpus,
    read_lines,
    save_corpus,
    split_corpus,
)
from phrasewin.decoder import build_forest, dedup_proposals, select_forest_greedy
from phrasewin.metrics import LEVELS, evaluate, project_bio
from phrasewin import swm

log = logging.getLogger("phrasewin")

LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class CommandError(Exception):
    pass


def _setup_logging() -> None:
    name = os.environ.get("PW_LOG", "info").strip().lower() or "info"
    if name not in LOG_LEVELS:
        raise CommandError(f"PW_LOG must be one of {sorted(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], format="%(message)s", stream=sys.stderr, force=True)


def _echo(command: str, **resolved) -> None:
    log.info("resolved %s", json.dumps({"command": command, **resolved}, ensure_ascii=False, sort_keys=True))


def _load(path) -> Corpus:
    corpus, diags = load_corpus(path)
    for d in diags:
        log.warning("%s: skipped %s", path, d)
    return corpus


# --------------------------------------------------------------------------


def cmd_validate(args) -> int:
    _echo("validate", corpus=args.corpus)
    bad = good = 0
    for lineno, line in enumerate(read_lines(args.corpus), start=1):
        if not line.strip():
            continue
        sent, diags = check_line(line, lineno)
        for d in diags:
            print(f"{args.corpus}:{d}")
        bad += sent is None
        good += sent is not None
    print(f"{good} valid, {bad} invalid")
    return 1 if bad else 0


def cmd_synth(args) -> int:
    grammar = default_grammar() if args.grammar == "default" else SynthGrammar.load(args.grammar)
    _echo("synth", grammar=args.grammar, count=args.count, seed=args.seed, out=args.out)
    corpus = generate_synthetic(grammar, args.count, args.seed)
    save_corpus(corpus, args.out)
    return 0


def cmd_split(args) -> int:
    try:
        ratios = [float(r) for r in args.ratios.split(",")]
    except ValueError:
        raise CommandError(f"ratios must be comma separated numbers, got {args.ratios!r}") from None
    _echo("split", corpus=args.corpus, ratios=ratios, seed=args.seed, outdir=args.outdir)
    parts = split_corpus(_load(args.corpus), ratios, args.seed)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "dev", "test"), parts):
        if len(part):
            save_corpus(part, out / f"{name}.txt")
        else:
            (out / f"{name}.txt").write_bytes(b"")
        log.info("%s: %d sentences", name, len(part))
    return 0


def _train_config(args) -> swm.TrainConfig:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "threshold", None) is not None:
        raw["threshold"] = args.threshold
    return swm.TrainConfig.from_dict(raw)


def _recognize(model, corpus_or_chars, threshold):
    out = []
    for chars in corpus_or_chars:
        selected = select_forest_greedy(dedup_proposals(swm.predict_sentence(chars, model, threshold)))
        out.append((build_forest(selected, chars), selected))
    return out


def cmd_train(args) -> int:
    cfg = _train_config(args)
    _echo("train", train=args.train, dev=args.dev, model_out=args.model_out, **cfg.to_dict())
    train_set, dev_set = _load(args.train), _load(args.dev)

    def report(stats, model):
        pred = [f for f, _ in _recognize(model, [s.chars for s in dev_set], cfg.threshold)]
        f1 = evaluate(pred, dev_set.sentences)["micro"]["f1"]
        print(
            f"epoch {stats.epoch} loss {stats.mean_total:.6f} objectness {stats.mean_objectness:.6f} "
            f"offset {stats.mean_offset:.6f} type {stats.mean_type:.6f} refine {stats.mean_refine:.6f} "
            f"dev_f1 {f1:.6f}",
            flush=True,
        )

    try:
        model = swm.train(train_set.sentences, cfg, callback=report)
    except swm.NonFiniteLoss as exc:
        raise CommandError(f"training aborted, no model written: {exc}") from exc
    swm.save_model(model, args.model_out)
    return 0


def _input_chars(path) -> list[str]:
    out = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            out.append(parse_annotation(line).chars)
        except AnnotationError:
            out.append(line)
    return out


def cmd_predict(args) -> int:
    threshold = 0.5 if args.threshold is None else args.threshold
    _echo("predict", model=args.model, input=args.input, out=args.out, threshold=threshold)
    model = swm.load_model(args.model)
    lines, records = [], []
    for forest, selected in _recognize(model, _input_chars(args.input), threshold):
        text = serialize_annotation(forest)
        lines.append(text)
        records.append(
            {
                "chars": forest.chars,
                "annotation": text,
                "phrases": [
                    {"start": p.span.start, "end": p.span.end, "type": p.kind.label, "score": p.score}
                    for p in sorted(selected, key=lambda p: (p.span.start, -p.span.end))
                ],
            }
        )
    Path(args.out).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    Path(str(args.out) + ".json").write_text(
        json.dumps({"threshold": threshold, "sentences": records}, ensure_ascii=False, indent=1),
        encoding="utf-8",
    )
    return 0


def cmd_eval(args) -> int:
    threshold = 0.5 if args.threshold is None else args.threshold
    _echo("eval", model=args.model, test=args.test, threshold=threshold, level=args.level)
    model = swm.load_model(args.model)
    gold = _load(args.test).sentences
    pred = [f for f, _ in _recognize(model, [s.chars for s in gold], threshold)]
    report = evaluate(pred, gold, level=args.level, phrase_accuracy=not args.no_phrase_accuracy)
    report["settings"] = {"threshold": threshold, "level": args.level}
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.metrics_out:
        Path(args.metrics_out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_project_bio(args) -> int:
    _echo("project-bio", corpus=args.corpus, level=args.level, out=args.out)
    blocks = []
    for s in _load(args.corpus):
        tags = project_bio(s, args.level)
        blocks.append("".join(f"{ch}\t{t}\n" for ch, t in zip(s.chars, tags)))
    Path(args.out).write_text("\n".join(blocks), encoding="utf-8")
    return 0


# --------------------------------------------------------------------------


def _level(value: str) -> str:
    if value not in LEVELS:
        raise argparse.ArgumentTypeError(f"level must be one of {', '.join(LEVELS)}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phrasewin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a corpus file against the annotation rules")
    s.add_argument("corpus")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("grammar", help="grammar JSON file, or 'default' for the bundled grammar")
    s.add_argument("count", type=int)
    s.add_argument("seed", type=int)
    s.add_argument("out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="shuffle and split a corpus into train/dev/test")
    s.add_argument("corpus")
    s.add_argument("ratios", help="e.g. 0.8,0.1,0.1")
    s.add_argument("seed", type=int)
    s.add_argument("outdir")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train a window model")
    s.add_argument("train")
    s.add_argument("dev")
    s.add_argument("config", nargs="?", help="training config JSON (same as --config)")
    s.add_argument("model_out")
    s.add_argument("--config", dest="config_flag", metavar="PATH")
    s.add_argument("--seed", type=int)
    s.add_argument("--threshold", type=float)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="annotate raw sentences")
    s.add_argument("model")
    s.add_argument("input")
    s.add_argument("out")
    s.add_argument("--threshold", type=float)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="score a model on an annotated test corpus")
    s.add_argument("model")
    s.add_argument("test")
    s.add_argument("--threshold", type=float)
    s.add_argument("--level", type=_level, default="outermost")
    s.add_argument("--metrics-out", metavar="PATH")
    s.add_argument("--no-phrase-accuracy", action="store_true", help="omit the per-phrase accuracy field")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("project-bio", help="write BIO tags for every sentence")
    s.add_argument("corpus")
    s.add_argument("level", type=_level)
    s.add_argument("out")
    s.set_defaults(func=cmd_project_bio)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train":
        if args.config and args.config_flag:
            parser.error("give the training config either positionally or with --config")
        args.config = args.config or args.config_flag
    try:
        _setup_logging()
        return args.func(args)
    except (CommandError, EmptyCorpus, OSError, ValueError, RuntimeError) as exc:
        print(f"phrasewin {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
