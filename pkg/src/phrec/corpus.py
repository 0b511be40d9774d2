"""Article ingestion, normalization and truncation."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .errors import DataIntegrityError

WORD = "word"
PHRASE = "phrase"
LEVELS = (WORD, PHRASE)

PreTokenizer = Callable[[str], str]


class CorpusError(DataIntegrityError):
    """Malformed or inconsistent article data."""


class DuplicateArticleError(CorpusError):
    def __init__(self, article_id: str):
        super().__init__(f"duplicate article id {article_id!r}")
        self.article_id = article_id


@dataclass(frozen=True)
class Article:
    id: str
    title: str
    body: str
    timestamp: int

    def __post_init__(self):
        if not self.id:
            raise CorpusError("article id must be non-empty")
        if self.timestamp < 0:
            raise CorpusError(f"article {self.id!r}: negative timestamp")

    def text(self, with_title: bool = True) -> str:
        if with_title and self.title:
            return f"{self.title}\n{self.body}"
        return self.body


@dataclass
class UnitSequence:
    article_id: str
    units: list[str]
    level: str = WORD

    def __post_init__(self):
        if self.level not in LEVELS:
            raise CorpusError(f"unknown level {self.level!r}")
        if any(u == "" for u in self.units):
            raise CorpusError(f"article {self.article_id!r}: empty unit")

    def __len__(self) -> int:
        return len(self.units)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_text(raw: str, pre_tokenizer: PreTokenizer | None = None) -> list[str]:
    """Lowercase, drop every Unicode punctuation character, split on whitespace.

    Punctuation is replaced by a space, so ``"state-of-the-art"`` yields four
    tokens. ``pre_tokenizer`` runs first and must return whitespace-delimited
    text; it is the hook for unsegmented scripts.
    """
    if pre_tokenizer is not None:
        raw = pre_tokenizer(raw)
    cleaned = "".join(" " if _is_punct(ch) else ch for ch in raw.lower())
    return cleaned.split()


def truncate(seq: UnitSequence, max_len: int) -> UnitSequence:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if len(seq.units) <= max_len:
        return seq
    return UnitSequence(seq.article_id, seq.units[:max_len], seq.level)


_REQUIRED = ("id", "title", "body", "timestamp")


def _parse_record(obj: object, lineno: int) -> Article:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise CorpusError(f"line {lineno}: missing field(s) {', '.join(missing)}")
    ts = obj["timestamp"]
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise CorpusError(f"line {lineno}: timestamp must be an integer")
    for key in ("id", "title", "body"):
        if not isinstance(obj[key], str):
            raise CorpusError(f"line {lineno}: {key} must be a string")
    try:
        return Article(obj["id"], obj["title"], obj["body"], ts)
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None


@dataclass
class ArticleStore:
    """In-memory id -> Article map. Insertion order is preserved."""

    articles: dict[str, Article] = field(default_factory=dict)

    def add(self, article: Article) -> None:
        if article.id in self.articles:
            raise DuplicateArticleError(article.id)
        self.articles[article.id] = article

    def __getitem__(self, article_id: str) -> Article:
        return self.articles[article_id]

    def __contains__(self, article_id: object) -> bool:
        return article_id in self.articles

    def __len__(self) -> int:
        return len(self.articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self.articles.values())

    def ids(self) -> list[str]:
        return list(self.articles)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for art in self.articles.values():
                fh.write(json.dumps(asdict(art), ensure_ascii=False, sort_keys=True))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ArticleStore":
        with open(path, encoding="utf-8") as fh:
            return ingest_articles(fh)


def ingest_articles(source: Iterable[str | dict]) -> ArticleStore:
    """Build a store from JSON-lines text (or already-decoded dicts).

    Blank lines are skipped but still counted for error line numbers.
    """
    store = ArticleStore()
    for lineno, record in enumerate(source, start=1):
        if isinstance(record, str):
            if not record.strip():
                continue
            try:
                record = json.loads(record)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        store.add(_parse_record(record, lineno))
    return store


def tokenize_store(
    store: ArticleStore,
    with_title: bool = True,
    pre_tokenizer: PreTokenizer | None = None,
) -> list[UnitSequence]:
    return [
        UnitSequence(art.id, normalize_text(art.text(with_title), pre_tokenizer), WORD)
        for art in store
    ]


def save_sequences(seqs: Iterable[UnitSequence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in seqs:
            rec = {"article_id": s.article_id, "level": s.level, "units": s.units}
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def load_sequences(path: str | Path) -> list[UnitSequence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(UnitSequence(rec["article_id"], list(rec["units"]), rec["level"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}: line {lineno}: bad sequence record ({exc})") from None
    return out
