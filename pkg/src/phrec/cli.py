"""Command line entry point: ``phrec <stage> [options]``.

Stage subcommands run in one of two modes. With explicit file arguments
(``--out``, or ``--trace`` for viz) they act on those files alone. Without
them they read and write the work directory named in the pipeline config,
going through the same content-hash cache as ``phrec pipeline``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, PhrecError
from .pipeline import LEVELS, PipelineConfig, compare_levels, run_pipeline, run_stages

log = logging.getLogger("phrec")

MODELS = ("textcnn", "cdssm", "mvlstm", "knrm", "bilstm_sa")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data integrity here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS defaults let global flags appear before or after the subcommand
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON or YAML config file")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--force", action="store_true", help="ignore the stage cache")
    common.add_argument("--work-dir", help="pipeline output directory (overrides the config)")
    common.add_argument("-v", "--verbose", action="count")

    parser = _Parser(prog="phrec", description="Phrase-aware article recommendation pipeline.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.add_argument("--out", help="write this stage's output here instead of the work directory")
        return p

    p = add("ingest", "load article records and tokenize them into words")
    p.add_argument("--articles", help="article records, one JSON object per line")
    p.add_argument("--no-title", action="store_true", help="do not prepend titles to bodies")

    p = add("mine", "mine a scored phrase lexicon")
    p.add_argument("--store", help="article store written by ingest")
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-n", type=int)
    p.add_argument("--min-freq", type=int)

    p = add("label", "segment articles into units by longest match")
    p.add_argument("--store", help="article store written by ingest")
    p.add_argument("--lexicon", help="scored lexicon (TSV); omit for word-level units")
    p.add_argument("--threshold", type=float)

    p = add("embed", "train unit embeddings")
    p.add_argument("--labeled", help="unit sequences written by label")
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--level", choices=LEVELS, action="append", help="pipeline mode: unit level (repeatable)")

    p = add("pairs", "build click/view pairs with negatives and split them")
    p.add_argument("--log", help="view/click event log, one JSON object per line")
    p.add_argument("--store", help="article store used for negative fill-in")
    p.add_argument("--behavior", choices=("click", "view"))
    p.add_argument("--m", type=int)
    p.add_argument("--cap", type=int)

    p = add("train", "train a ranker")
    p.add_argument("--model", choices=MODELS, action="append", help="model (repeatable in pipeline mode)")
    p.add_argument("--level", choices=LEVELS, action="append", help="unit level (repeatable in pipeline mode)")
    p.add_argument("--pairs", help="directory with train/val/test.jsonl")
    p.add_argument("--embeddings", help="vectors file written by embed")
    p.add_argument("--labeled", help="unit sequences the instances refer to")
    p.add_argument("--epochs", type=int)

    p = add("eval", "evaluate a trained ranker")
    p.add_argument("--model", choices=MODELS, action="append")
    p.add_argument("--level", choices=LEVELS, action="append")
    p.add_argument("--ckpt", help="checkpoint written by train")
    p.add_argument("--test", help="instance file to evaluate on")
    p.add_argument("--labeled", help="unit sequences the instances refer to")

    p = add("viz", "render attention heatmaps")
    p.add_argument("--trace", help="attention trace JSON")
    p.add_argument("--level", choices=LEVELS, action="append")

    sub.add_parser("pipeline", help="run every stage and write report.json", parents=[common])
    p = sub.add_parser("compare", help="one model at both levels, with phrase-minus-word deltas", parents=[common])
    p.add_argument("--model", choices=MODELS)

    p = sub.add_parser("synth", help="write the bundled synthetic corpus and event log", parents=[common])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--overfit", action="store_true", help="the tiny variant used for overfit checks")
    return parser


def _require(args, *names) -> None:
    missing = ["--" + n.replace("_", "-") for n in names if not getattr(args, n, None)]
    if missing:
        raise ConfigError(f"{args.command} --out also needs {', '.join(missing)}")


def _opt(args, name, default):
    val = getattr(args, name, None)
    return default if val is None else val


def _seed(args, default=0) -> int:
    return getattr(args, "seed", default)


def _config_data(args) -> dict:
    from .rankers.config import load_config_file

    path = getattr(args, "config", None)
    return load_config_file(path) if path else {}


def load_config(args) -> PipelineConfig:
    data = _config_data(args)
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "work_dir", None):
        data["work_dir"] = args.work_dir
    model = getattr(args, "model", None)
    if model:
        data["models"] = model if isinstance(model, list) else [model]
    if getattr(args, "level", None):
        data["levels"] = args.level
    # stage flags that have a pipeline-config counterpart
    for flag, key in _PIPELINE_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None and not (flag == "epochs" and args.command != "embed"):
            data[key] = val
    if getattr(args, "no_title", False):
        data["with_title"] = False
    if getattr(args, "lexicon", None):
        data["mine"] = False
    return PipelineConfig.from_dict(data)


_PIPELINE_KEYS = {
    "articles": "articles", "log": "events", "lexicon": "lexicon", "threshold": "threshold", "max_n": "max_n",
    "min_freq": "min_freq", "dim": "dim", "epochs": "glove_epochs", "behavior": "behavior", "m": "m", "cap": "cap",
}


# --------------------------------------------------------------------------
# standalone stage commands


def _standalone(args) -> None:
    from . import attention
    from .corpus import ArticleStore, load_sequences, save_sequences, tokenize_store
    from .glove import load_vectors, train_embeddings
    from .interactions import DatasetSplit, build_dataset, load_instances, parse_event_log
    from .labeler import label_corpus
    from .phrases import PhraseLexicon, import_lexicon, mine_phrases
    from .pipeline import evaluate_checkpoint, run_training, save_model
    from .rankers import RankerConfig

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd == "ingest":
        _require(args, "articles")
        ArticleStore.load(args.articles).save(out)
    elif cmd == "mine":
        _require(args, "store")
        words = tokenize_store(ArticleStore.load(args.store))
        lexicon, _ = mine_phrases([s.units for s in words], _opt(args, "max_n", 6), _opt(args, "min_freq", 5),
                                  _opt(args, "threshold", 0.5))
        lexicon.save(out)
    elif cmd == "label":
        _require(args, "store")
        threshold = _opt(args, "threshold", 0.5)
        words = tokenize_store(ArticleStore.load(args.store))
        lexicon = import_lexicon(args.lexicon, threshold) if args.lexicon else PhraseLexicon({}, threshold)
        save_sequences(label_corpus(words, lexicon) if args.lexicon else words, out)
    elif cmd == "embed":
        _require(args, "labeled")
        table = train_embeddings(load_sequences(args.labeled), dim=_opt(args, "dim", 50),
                                 epochs=_opt(args, "epochs", 25), seed=_seed(args))
        table.save(out)
    elif cmd == "pairs":
        _require(args, "log")
        events = parse_event_log(args.log)
        corpus_ids = ArticleStore.load(args.store).ids() if args.store else None
        ds = build_dataset(events, _opt(args, "behavior", "click"), _opt(args, "m", 4), _opt(args, "cap", 8),
                           _seed(args), corpus_ids)
        ds.save(out)
    elif cmd == "train":
        _require(args, "pairs", "embeddings", "labeled")
        data = _config_data(args)
        data = data.get("ranker", data)
        if args.model:
            data["model"] = args.model[-1]
        if args.level:
            data["embedding_level"] = args.level[-1]
        if args.epochs is not None:
            data["epochs"] = args.epochs
        if getattr(args, "seed", None) is not None:
            data["seed"] = args.seed
        rcfg = RankerConfig.from_dict(data)
        units, vecs = load_vectors(args.embeddings)
        result, inputs, traces = run_training(rcfg, load_sequences(args.labeled), units, vecs,
                                              DatasetSplit.load(args.pairs))
        save_model(out, result.model, inputs.vocab, {"best_epoch": result.best_epoch})
        for k, tr in enumerate(traces.values()):
            tr.save(out.parent / f"{out.stem}.trace{k}.json")
    elif cmd == "eval":
        _require(args, "ckpt", "test", "labeled")
        report = evaluate_checkpoint(args.ckpt, load_sequences(args.labeled), load_instances(args.test))
        report.save(out)
        print(report.table(Path(args.ckpt).stem))
    elif cmd == "viz":
        _require(args, "trace")
        out.write_text(attention.emit_heatmap(attention.AttentionTrace.load(args.trace)), encoding="utf-8")
    print(f"{cmd}: wrote {out}")


# --------------------------------------------------------------------------
# pipeline-mode commands


def _print_reports(cfg: PipelineConfig) -> None:
    from .evaluation import EvalReport

    for model in cfg.models:
        for level in cfg.levels:
            path = cfg.paths()["reports"] / f"{model}.{level}.json"
            if path.exists():
                d = json.loads(path.read_text())
                rep = EvalReport(d["mrr"], d["acc"], d["h3"], d["h5"], d["n_instances"], d["m"])
                print(rep.table(f"{model} ({level})"))


def _check_inputs(cfg: PipelineConfig, command: str) -> None:
    if command == "ingest" and not Path(cfg.articles).is_file():
        raise ConfigError(f"articles file not found: {cfg.articles}")
    if command == "pairs" and not Path(cfg.events).is_file():
        raise ConfigError(f"event log not found: {cfg.events}")
    if command == "mine" and not cfg.mine and not (cfg.lexicon and Path(cfg.lexicon).is_file()):
        raise ConfigError(f"lexicon file not found: {cfg.lexicon}")


def cmd_synth(args) -> None:
    from .synthetic import SyntheticConfig, generate, overfit_config

    seed = _seed(args)
    cfg = overfit_config(seed) if args.overfit else SyntheticConfig(seed=seed)
    for name, p in generate(cfg).save(args.out).items():
        print(f"{name}: {p}")


def run(args) -> None:
    force = getattr(args, "force", False)
    if args.command == "synth":
        cmd_synth(args)
    elif args.command == "pipeline":
        cfg = load_config(args)
        _, cache = run_pipeline(cfg, force)
        print(f"ran {len(cache.ran)} stage(s), skipped {len(cache.skipped)}")
        _print_reports(cfg)
        print(f"report: {cfg.paths()['report']}")
    elif args.command == "compare":
        out = compare_levels(load_config(args), args.model, force)
        print(json.dumps(out, indent=2, sort_keys=True))
    elif getattr(args, "out", None):
        _standalone(args)
    else:
        if args.command == "train" and args.epochs is not None:
            raise ConfigError("set epochs in the config's ranker section in pipeline mode")
        cfg = load_config(args)
        _check_inputs(cfg, args.command)
        cache = run_stages(cfg, [args.command], force)
        print(f"{args.command}: ran {len(cache.ran)} stage(s), skipped {len(cache.skipped)}")
        if args.command == "eval":
            _print_reports(cfg)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0) or 0, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except PhrecError as exc:
        print(f"phrec: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"phrec: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
