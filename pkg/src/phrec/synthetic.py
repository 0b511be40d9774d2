"""Synthetic corpora and behaviour logs with planted multi-word concepts.

Topics come in twin pairs. Twins draw their concept phrases from the same
pool of words, paired up differently, so every concept word is ambiguous:
it belongs to one concept in each twin. At the unigram level twin articles
look alike; only the word combinations tell them apart. Users read within
one topic, and the recommendations shown under each article deliberately
include the twin topic as a hard negative.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Article, ArticleStore
from .interactions import CLICK, VIEW, Event, EventLog, group_events


@dataclass
class SyntheticConfig:
    n_twin_pairs: int = 4
    concepts_per_topic: int = 4
    n_fillers: int = 120
    articles_per_topic: int = 40
    concept_mentions: tuple[int, int] = (5, 8)
    filler_len: tuple[int, int] = (18, 30)
    title_fillers: int = 2
    n_users: int = 150
    session_clicks: int = 10
    impressions: int = 5
    twin_negative_rate: float = 0.75
    seed: int = 0


@dataclass
class SyntheticData:
    store: ArticleStore
    log: EventLog
    concepts: dict[int, list[tuple[str, ...]]]
    topic_of: dict[str, int]
    config: SyntheticConfig = field(default_factory=SyntheticConfig)

    def articles_by_topic(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for aid, t in self.topic_of.items():
            out.setdefault(t, []).append(aid)
        return out

    def save(self, out_dir: str | Path) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        from .interactions import save_event_log

        paths = {"articles": out_dir / "articles.jsonl", "events": out_dir / "events.jsonl", "truth": out_dir / "truth.json"}
        self.store.save(paths["articles"])
        save_event_log(self.log, paths["events"])
        truth = {
            "concepts": {str(t): [" ".join(c) for c in cs] for t, cs in self.concepts.items()},
            "topic_of": self.topic_of,
            "config": asdict(self.config),
        }
        paths["truth"].write_text(json.dumps(truth, indent=1, sort_keys=True), encoding="utf-8")
        return paths


def _concept_words(n_pairs: int, per_topic: int) -> tuple[list[str], dict[int, list[tuple[str, ...]]]]:
    words, concepts = [], {}
    for p in range(n_pairs):
        pool = [f"k{p}{chr(ord('a') + i)}" for i in range(2 * per_topic)]
        words += pool
        a = [(pool[2 * i], pool[2 * i + 1]) for i in range(per_topic)]
        # the twin re-pairs each odd word with the next pair's even word
        b = [(pool[2 * i + 1], pool[(2 * i + 2) % len(pool)]) for i in range(per_topic)]
        concepts[2 * p] = a
        concepts[2 * p + 1] = b
    return words, concepts


def _article_text(rng, concepts, fillers, cfg: SyntheticConfig) -> tuple[str, str]:
    n_f = int(rng.integers(cfg.filler_len[0], cfg.filler_len[1] + 1))
    n_c = int(rng.integers(cfg.concept_mentions[0], cfg.concept_mentions[1] + 1))
    body = [str(fillers[i]) for i in rng.integers(0, len(fillers), n_f)]
    # concepts go into distinct gaps so two concepts are never adjacent
    slots = np.sort(rng.choice(n_f + 1, size=min(n_c, n_f + 1), replace=False))[::-1]
    for s in slots:
        c = concepts[int(rng.integers(0, len(concepts)))]
        body[s:s] = list(c)
    title_c = concepts[int(rng.integers(0, len(concepts)))]
    title = [str(fillers[int(rng.integers(0, len(fillers)))]) for _ in range(cfg.title_fillers)]
    title[1:1] = list(title_c)
    return " ".join(title).capitalize() + ".", " ".join(body) + "."


def generate(cfg: SyntheticConfig | None = None) -> SyntheticData:
    cfg = cfg or SyntheticConfig()
    rng = np.random.default_rng(cfg.seed)
    _, concepts = _concept_words(cfg.n_twin_pairs, cfg.concepts_per_topic)
    fillers = [f"f{i:03d}" for i in range(cfg.n_fillers)]
    n_topics = 2 * cfg.n_twin_pairs
    store = ArticleStore()
    topic_of: dict[str, int] = {}
    by_topic: dict[int, list[str]] = {t: [] for t in range(n_topics)}
    k = 0
    for t in range(n_topics):
        for _ in range(cfg.articles_per_topic):
            aid = f"a{k:05d}"
            title, body = _article_text(rng, concepts[t], fillers, cfg)
            store.add(Article(aid, title, body, k))
            topic_of[aid] = t
            by_topic[t].append(aid)
            k += 1

    events: list[Event] = []
    all_ids = store.ids()
    for u in range(cfg.n_users):
        user = f"u{u:04d}"
        topic = int(rng.integers(0, n_topics))
        twin = topic ^ 1
        clock = 1_000_000 + u * 10_000
        current = by_topic[topic][int(rng.integers(0, len(by_topic[topic])))]
        for _ in range(cfg.session_clicks):
            same = [a for a in by_topic[topic] if a != current]
            nxt = same[int(rng.integers(0, len(same)))]
            shown = {nxt}
            negs: list[str] = []
            if rng.random() < cfg.twin_negative_rate:
                negs.append(by_topic[twin][int(rng.integers(0, len(by_topic[twin])))])
            while len(negs) < cfg.impressions - 1:
                cand = all_ids[int(rng.integers(0, len(all_ids)))]
                if topic_of[cand] != topic and cand not in negs:
                    negs.append(cand)
            shown.update(negs)
            order = sorted(shown)
            rng.shuffle(order)
            events.append(Event(user, current, VIEW, clock, tuple(order)))
            events.append(Event(user, nxt, CLICK, clock + 30))
            clock += 60
            current = nxt
        events.append(Event(user, current, VIEW, clock, ()))
    log = group_events(events)
    return SyntheticData(store, log, concepts, topic_of, cfg)


def overfit_config(seed: int = 0) -> SyntheticConfig:
    """A tiny world: enough users for ~50 training instances."""
    return SyntheticConfig(
        n_twin_pairs=2,
        concepts_per_topic=3,
        n_fillers=150,
        articles_per_topic=12,
        concept_mentions=(3, 5),
        filler_len=(8, 14),
        n_users=50,
        session_clicks=3,
        seed=seed,
    )


def clustered_stream(
    n_clusters: int = 4,
    per_cluster: int = 10,
    n_tokens: int = 100_000,
    segment: int = 20,
    seed: int = 0,
    segments_per_doc: int = 10,
) -> tuple[list[list[str]], dict[str, int]]:
    """Documents made of segments, each segment drawn from one cluster's vocabulary.

    Used for embedding recovery checks: words from the same cluster co-occur
    far more often than words from different clusters.
    """
    rng = np.random.default_rng(seed)
    vocab = {f"c{c}w{i}": c for c in range(n_clusters) for i in range(per_cluster)}
    names = list(vocab)
    docs: list[list[str]] = []
    doc: list[str] = []
    left = n_tokens
    while left > 0:
        n = min(segment, left)
        c = int(rng.integers(0, n_clusters))
        idx = rng.integers(0, per_cluster, n)
        doc.extend(names[c * per_cluster + int(i)] for i in idx)
        left -= n
        if len(doc) >= segment * segments_per_doc:
            docs.append(doc)
            doc = []
    if doc:
        docs.append(doc)
    return docs, vocab
