"""End-to-end orchestration with content-hash stage caching.

Each stage reads its inputs from files in the work directory and writes its
outputs there. A stage is skipped when its outputs exist and the hash of its
parameters plus input file contents matches the one recorded last time.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import attention as viz
from .corpus import WORD, ArticleStore, UnitSequence, load_sequences, save_sequences, tokenize_store, truncate
from .errors import ConfigError, PhrecError
from .evaluation import EvalReport, evaluate_model
from .glove import load_vectors, train_embeddings
from .interactions import DatasetSplit, EvalInstance, build_dataset, parse_event_log
from .labeler import UNK, Vocabulary, build_vocab, label_corpus
from .nn import load_checkpoint, save_checkpoint
from .phrases import PhraseLexicon, import_lexicon, mine_phrases
from .rankers import EncodedInstance, PairRanker, RankerConfig, build_model, train

log = logging.getLogger(__name__)

LEVELS = ("word", "phrase")


class StageError(PhrecError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


@dataclass
class PipelineConfig:
    work_dir: str = "work"
    articles: str = "articles.jsonl"
    events: str = "events.jsonl"
    lexicon: str | None = None
    mine: bool = True
    max_n: int = 6
    min_freq: int = 5
    threshold: float = 0.5
    with_title: bool = True
    dim: int = 50
    window: int = 5
    glove_epochs: int = 25
    glove_lr: float = 0.05
    x_max: float = 100.0
    glove_alpha: float = 0.75
    behavior: str = "click"
    m: int = 4
    cap: int | None = 8
    seed: int = 0
    vocab_min_count: int = 3
    levels: tuple[str, ...] = LEVELS
    models: tuple[str, ...] = ("textcnn",)
    ranker: dict = field(default_factory=dict)
    viz: bool = True

    def __post_init__(self):
        self.levels = tuple(self.levels)
        self.models = tuple(self.models)
        bad = [lv for lv in self.levels if lv not in LEVELS]
        if bad:
            raise ConfigError(f"unknown level(s) {bad}")
        RankerConfig.from_dict({**self.ranker, "model": self.models[0]})

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown pipeline config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def ranker_config(self, model: str, level: str) -> RankerConfig:
        d = {**self.ranker, "model": model, "embedding_level": level}
        d.setdefault("seed", self.seed)
        return RankerConfig.from_dict(d)

    def paths(self) -> dict[str, Path]:
        w = Path(self.work_dir)
        return {
            "store": w / "store.jsonl",
            "words": w / "words.jsonl",
            "lexicon": w / "lexicon.tsv",
            "phrases": w / "phrases.jsonl",
            "pairs": w / "pairs",
            "ckpt": w / "checkpoints",
            "reports": w / "reports",
            "viz": w / "viz",
            "report": w / "report.json",
            "cache": w / "cache.json",
        }

    def validate(self) -> None:
        if not Path(self.articles).is_file():
            raise ConfigError(f"articles file not found: {self.articles}")
        if not Path(self.events).is_file():
            raise ConfigError(f"event log not found: {self.events}")
        if not self.mine:
            if not self.lexicon:
                raise ConfigError("mining is disabled but no lexicon path was given")
            if not Path(self.lexicon).is_file():
                raise ConfigError(f"lexicon file not found: {self.lexicon}")


# --------------------------------------------------------------------------
# model-input preparation


def corpus_path(paths: dict[str, Path], level: str) -> Path:
    return paths["words"] if level == WORD else paths["phrases"]


def vectors_path(work_dir: str | Path, level: str) -> Path:
    return Path(work_dir) / f"vectors.{level}.txt"


def embedding_matrix(vocab: Vocabulary, units: Sequence[str], vecs: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Rows of ``vecs`` aligned to ``vocab``.

    UNK, and any unit the table lacks, gets a zero row: it carries no
    content and must not exact-match other unknown units.
    """
    index = {u: i for i, u in enumerate(units)}
    out = np.zeros((len(vocab), vecs.shape[1]))
    missing = []
    for i, u in enumerate(vocab.itos):
        if u == UNK:
            continue
        if u in index:
            out[i] = vecs[index[u]]
        else:
            missing.append(u)
    return out, missing


def article_ids(seqs: Sequence[UnitSequence], vocab: Vocabulary, max_len: int) -> dict[str, np.ndarray]:
    return {s.article_id: np.array(vocab.encode(truncate(s, max_len).units), dtype=np.int64) for s in seqs}


def encode_instances(instances: Sequence[EvalInstance], ids: dict[str, np.ndarray]) -> list[EncodedInstance]:
    out = []
    for inst in instances:
        try:
            out.append(
                EncodedInstance(
                    ids[inst.a_c],
                    ids[inst.positive.a_r],
                    [ids[n.a_r] for n in inst.negatives],
                    inst.a_c,
                    inst.positive.a_r,
                    [n.a_r for n in inst.negatives],
                )
            )
        except KeyError as exc:
            raise PhrecError(f"instance refers to unknown article {exc.args[0]!r}") from None
    return out


@dataclass
class ModelInputs:
    vocab: Vocabulary
    matrix: np.ndarray
    ids: dict[str, np.ndarray]
    seqs: dict[str, UnitSequence]


def rescale_rows(matrix: np.ndarray) -> np.ndarray:
    """Divide by one scalar so the non-zero rows have mean L2 norm 1.

    GloVe vectors from a small corpus stay close to their tiny initial scale,
    which leaves recurrent models with near-zero inputs. A single global factor
    keeps every direction and relative magnitude intact.
    """
    norms = np.linalg.norm(matrix, axis=1)
    nz = norms[norms > 0]
    return matrix / nz.mean() if len(nz) else matrix


def prepare_inputs(seqs: Sequence[UnitSequence], units: Sequence[str], vecs: np.ndarray,
                   min_count: int = 3, max_len: int = 512, rescale: bool = True) -> ModelInputs:
    vocab = build_vocab(seqs, min_count=min_count)
    matrix, missing = embedding_matrix(vocab, units, vecs)
    if missing:
        log.warning("%d vocabulary units have no embedding; using zeros", len(missing))
    if rescale:
        matrix = rescale_rows(matrix)
    return ModelInputs(vocab, matrix, article_ids(seqs, vocab, max_len), {s.article_id: s for s in seqs})


def save_model(path: str | Path, model: PairRanker, vocab: Vocabulary, extra: dict | None = None) -> Path:
    meta = {"config": model.config.to_dict(), "vocab": vocab.itos, **(extra or {})}
    return save_checkpoint(path, sorted(model.state_dict().items()), meta)


def load_model(path: str | Path) -> tuple[PairRanker, Vocabulary, dict]:
    state, meta = load_checkpoint(path)
    config = RankerConfig.from_dict(meta["config"])
    model = build_model(config, state["emb"])
    model.load_state_dict(state)
    vocab = Vocabulary(meta["vocab"], {})
    return model, vocab, meta


# --------------------------------------------------------------------------
# stage cache


def file_digest(path: str | Path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for p in sorted(path.rglob("*")):
            if p.is_file():
                h.update(str(p.relative_to(path)).encode())
                h.update(p.read_bytes())
    elif path.exists():
        h.update(path.read_bytes())
    else:
        h.update(b"<missing>")
    return h.hexdigest()


class StageCache:
    def __init__(self, path: Path, force: bool = False):
        self.path = path
        self.force = force
        self.data = json.loads(path.read_text()) if path.exists() else {}
        self.ran: list[str] = []
        self.skipped: list[str] = []

    def key(self, stage: str, params: dict, inputs: Sequence[Path]) -> str:
        h = hashlib.sha256(stage.encode())
        h.update(json.dumps(params, sort_keys=True, default=str).encode())
        for p in inputs:
            h.update(file_digest(p).encode())
        return h.hexdigest()

    def run(self, stage: str, params: dict, inputs: Sequence[Path], outputs: Sequence[Path], fn: Callable[[], None]) -> None:
        key = self.key(stage, params, inputs)
        rec = self.data.get(stage)
        fresh = (
            not self.force
            and rec is not None
            and rec.get("key") == key
            and all(Path(o).exists() for o in outputs)
            and rec.get("outputs") == [file_digest(o) for o in outputs]
        )
        if fresh:
            log.info("stage %s: up to date, skipped", stage)
            self.skipped.append(stage)
            return
        log.info("stage %s: running", stage)
        try:
            fn()
        except PhrecError as exc:
            raise StageError(stage, exc) from exc
        except (ValueError, KeyError, OSError, ArithmeticError) as exc:
            raise StageError(stage, exc) from exc
        self.data[stage] = {"key": key, "outputs": [file_digest(o) for o in outputs]}
        self.path.write_text(json.dumps(self.data, indent=1, sort_keys=True))
        self.ran.append(stage)


# --------------------------------------------------------------------------
# stages


def stage_ingest(cfg: PipelineConfig, paths) -> None:
    store = ArticleStore.load(cfg.articles)
    store.save(paths["store"])
    save_sequences(tokenize_store(store, with_title=cfg.with_title), paths["words"])


def stage_mine(cfg: PipelineConfig, paths) -> None:
    if cfg.mine:
        seqs = load_sequences(paths["words"])
        lexicon, _ = mine_phrases([s.units for s in seqs], cfg.max_n, cfg.min_freq, cfg.threshold)
    else:
        lexicon = import_lexicon(cfg.lexicon, cfg.threshold)
    lexicon.save(paths["lexicon"])


def stage_label(cfg: PipelineConfig, paths) -> None:
    lexicon = import_lexicon(paths["lexicon"], cfg.threshold)
    save_sequences(label_corpus(load_sequences(paths["words"]), lexicon), paths["phrases"])


def stage_embed(cfg: PipelineConfig, paths, level: str) -> None:
    seqs = load_sequences(corpus_path(paths, level))
    table = train_embeddings(seqs, cfg.dim, cfg.window, cfg.glove_epochs, cfg.glove_lr, cfg.x_max,
                             cfg.glove_alpha, cfg.seed)
    table.save(vectors_path(cfg.work_dir, level))


def stage_pairs(cfg: PipelineConfig, paths) -> None:
    events = parse_event_log(cfg.events)
    corpus_ids = ArticleStore.load(paths["store"]).ids()
    ds = build_dataset(events, cfg.behavior, cfg.m, cfg.cap, cfg.seed, corpus_ids)
    ds.save(paths["pairs"])


def run_training(rcfg: RankerConfig, seqs: Sequence[UnitSequence], units, vecs, split: DatasetSplit,
                 min_count: int = 3, n_tracked: int | None = None):
    """Train one model and return (result, inputs, traces keyed by article id)."""
    inputs = prepare_inputs(seqs, units, vecs, min_count, rcfg.max_len)
    train_set = encode_instances(split.train, inputs.ids)
    val_set = encode_instances(split.val, inputs.ids)
    tracked = None
    n_tracked = rcfg.track_attention if n_tracked is None else n_tracked
    if rcfg.model == "bilstm_sa" and n_tracked:
        aids = list(dict.fromkeys(i.current_id for i in train_set if len(i.current)))[:n_tracked]
        tracked = {a: inputs.ids[a] for a in aids}
    result = train(rcfg, train_set, val_set, inputs.matrix, tracked=tracked)
    traces = {}
    for aid, recs in result.traces.items():
        units_shown = truncate(inputs.seqs[aid], rcfg.max_len).units
        tr = viz.AttentionTrace(aid, rcfg.embedding_level, list(units_shown))
        for epoch, A in recs:
            viz.record_attention(tr, epoch, A)
        traces[aid] = tr
    return result, inputs, traces


def stage_train(cfg: PipelineConfig, paths, model_name: str, level: str) -> None:
    rcfg = cfg.ranker_config(model_name, level)
    seqs = load_sequences(corpus_path(paths, level))
    units, vecs = load_vectors(vectors_path(cfg.work_dir, level))
    split = DatasetSplit.load(paths["pairs"])
    result, inputs, traces = run_training(rcfg, seqs, units, vecs, split, cfg.vocab_min_count)
    paths["ckpt"].mkdir(parents=True, exist_ok=True)
    stem = paths["ckpt"] / f"{model_name}.{level}"
    save_model(stem, result.model, inputs.vocab, {"best_epoch": result.best_epoch})
    Path(f"{stem}.history.json").write_text(json.dumps(result.history, indent=1, sort_keys=True))
    tr_dir = paths["ckpt"] / f"{model_name}.{level}.traces"
    if traces:
        tr_dir.mkdir(exist_ok=True)
        for k, tr in enumerate(traces.values()):
            tr.save(tr_dir / f"trace{k}.json")


def evaluate_checkpoint(ckpt: str | Path, seqs: Sequence[UnitSequence], instances: Sequence[EvalInstance]) -> EvalReport:
    model, vocab, _ = load_model(ckpt)
    ids = article_ids(seqs, vocab, model.config.max_len)
    return evaluate_model(model, encode_instances(instances, ids))


def stage_eval(cfg: PipelineConfig, paths, model_name: str, level: str) -> None:
    seqs = load_sequences(corpus_path(paths, level))
    test = DatasetSplit.load(paths["pairs"]).test
    report = evaluate_checkpoint(paths["ckpt"] / f"{model_name}.{level}.json", seqs, test)
    paths["reports"].mkdir(parents=True, exist_ok=True)
    report.save(paths["reports"] / f"{model_name}.{level}.json")


def stage_viz(cfg: PipelineConfig, paths, level: str) -> None:
    tr_dir = paths["ckpt"] / f"bilstm_sa.{level}.traces"
    out = paths["viz"] / level
    out.mkdir(parents=True, exist_ok=True)
    for p in sorted(tr_dir.glob("trace*.json")):
        (out / (p.stem + ".html")).write_text(viz.emit_heatmap(viz.AttentionTrace.load(p)), encoding="utf-8")


def _report(cfg: PipelineConfig, paths) -> dict:
    out: dict = {"seed": cfg.seed, "behavior": cfg.behavior, "m": cfg.m, "results": {}}
    for model_name in cfg.models:
        for level in cfg.levels:
            rep = json.loads((paths["reports"] / f"{model_name}.{level}.json").read_text())
            out["results"].setdefault(model_name, {})[level] = rep
    for model_name, by_level in out["results"].items():
        if "word" in by_level and "phrase" in by_level:
            by_level["delta"] = {k: by_level["phrase"][k] - by_level["word"][k] for k in ("mrr", "acc", "h3", "h5")}
    return out


@dataclass
class Stage:
    name: str
    params: dict
    inputs: list[Path]
    outputs: list[Path]
    fn: Callable[[], None]

    @property
    def group(self) -> str:
        return self.name.split(".")[0]


def plan_stages(cfg: PipelineConfig) -> list[Stage]:
    """The full stage graph in execution order."""
    paths = cfg.paths()
    p = asdict(cfg)
    out = [
        Stage("ingest", {"with_title": cfg.with_title}, [Path(cfg.articles)], [paths["store"], paths["words"]],
              lambda: stage_ingest(cfg, paths)),
        Stage("mine", {"mine": cfg.mine, "max_n": cfg.max_n, "min_freq": cfg.min_freq, "threshold": cfg.threshold},
              [paths["words"]] if cfg.mine else [Path(cfg.lexicon)], [paths["lexicon"]],
              lambda: stage_mine(cfg, paths)),
        Stage("label", {"threshold": cfg.threshold}, [paths["words"], paths["lexicon"]], [paths["phrases"]],
              lambda: stage_label(cfg, paths)),
    ]
    glove_params = {k: p[k] for k in ("dim", "window", "glove_epochs", "glove_lr", "x_max", "glove_alpha", "seed")}
    for level in cfg.levels:
        out.append(Stage(f"embed.{level}", glove_params, [corpus_path(paths, level)],
                         [vectors_path(cfg.work_dir, level)], lambda lv=level: stage_embed(cfg, paths, lv)))
    out.append(Stage("pairs", {k: p[k] for k in ("behavior", "m", "cap", "seed")}, [Path(cfg.events), paths["store"]],
                     [paths["pairs"]], lambda: stage_pairs(cfg, paths)))
    for model_name in cfg.models:
        for level in cfg.levels:
            rcfg = cfg.ranker_config(model_name, level)
            stem = paths["ckpt"] / f"{model_name}.{level}"
            ckpt = [Path(f"{stem}.json"), Path(f"{stem}.bin")]
            out.append(Stage(f"train.{model_name}.{level}", {**rcfg.to_dict(), "min_count": cfg.vocab_min_count},
                             [corpus_path(paths, level), vectors_path(cfg.work_dir, level), paths["pairs"]], ckpt,
                             lambda m=model_name, lv=level: stage_train(cfg, paths, m, lv)))
            out.append(Stage(f"eval.{model_name}.{level}", {}, [*ckpt, paths["pairs"], corpus_path(paths, level)],
                             [paths["reports"] / f"{model_name}.{level}.json"],
                             lambda m=model_name, lv=level: stage_eval(cfg, paths, m, lv)))
    if cfg.viz and "bilstm_sa" in cfg.models:
        for level in cfg.levels:
            out.append(Stage(f"viz.{level}", {}, [paths["ckpt"] / f"bilstm_sa.{level}.traces"],
                             [paths["viz"] / level], lambda lv=level: stage_viz(cfg, paths, lv)))
    return out


def run_stages(cfg: PipelineConfig, groups: Sequence[str] | None = None, force: bool = False) -> StageCache:
    """Run the stages whose group (``ingest``, ``embed``, ``train`` ...) is listed, or all of them."""
    Path(cfg.work_dir).mkdir(parents=True, exist_ok=True)
    cache = StageCache(cfg.paths()["cache"], force)
    for st in plan_stages(cfg):
        if groups is None or st.group in groups:
            cache.run(st.name, st.params, st.inputs, st.outputs, st.fn)
    return cache


def write_report(cfg: PipelineConfig) -> dict:
    paths = cfg.paths()
    report = _report(cfg, paths)
    paths["report"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def run_pipeline(cfg: PipelineConfig, force: bool = False) -> tuple[dict, StageCache]:
    cfg.validate()
    cache = run_stages(cfg, None, force)
    return write_report(cfg), cache


def compare_levels(cfg: PipelineConfig, model: str | None = None, force: bool = False) -> dict:
    """Train one model at both unit levels with identical seeds; report metrics and phrase-minus-word deltas."""
    model = model or cfg.models[0]
    cfg = PipelineConfig.from_dict({**asdict(cfg), "models": (model,), "levels": LEVELS})
    report, _ = run_pipeline(cfg, force)
    res = report["results"][model]
    return {"model": model, "word": res["word"], "phrase": res["phrase"], "delta": res["delta"]}
