"""Greedy longest-match phrase labeling and vocabularies."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import PHRASE, WORD, UnitSequence
from .phrases import PhraseLexicon

JOINER = "_"
UNK = "<unk>"

_SPLIT_RE = re.compile(r"(?<!\\)((?:\\\\)*)_")


def escape_word(word: str) -> str:
    return word.replace("\\", "\\\\").replace(JOINER, "\\" + JOINER)


def unescape_word(piece: str) -> str:
    return re.sub(r"\\(.)", r"\1", piece)


def join_phrase(words: Sequence[str]) -> str:
    return JOINER.join(escape_word(w) for w in words)


def split_unit(unit: str) -> list[str]:
    """Inverse of :func:`join_phrase` (also handles single escaped words)."""
    pieces, start = [], 0
    for m in _SPLIT_RE.finditer(unit):
        end = m.end() - 1
        pieces.append(unit[start:end])
        start = m.end()
    pieces.append(unit[start:])
    return [unescape_word(p) for p in pieces]


def longest_match(words: Sequence[str], lexicon: PhraseLexicon | Iterable[Sequence[str]]) -> list[tuple[int, int]]:
    """Left-to-right greedy segmentation; returns (start, end) spans covering ``words``."""
    phrases = set(lexicon.entries) if isinstance(lexicon, PhraseLexicon) else {tuple(p) for p in lexicon}
    max_len = max((len(p) for p in phrases), default=0)
    spans = []
    i, n = 0, len(words)
    while i < n:
        step = 1
        for length in range(min(max_len, n - i), 1, -1):
            if tuple(words[i : i + length]) in phrases:
                step = length
                break
        spans.append((i, i + step))
        i += step
    return spans


def label(words: UnitSequence, lexicon: PhraseLexicon) -> UnitSequence:
    if words.level != WORD:
        raise ValueError("label expects a word-level sequence")
    w = words.units
    units = [join_phrase(w[a:b]) for a, b in longest_match(w, lexicon)]
    return UnitSequence(words.article_id, units, PHRASE)


def unlabel(seq: UnitSequence) -> UnitSequence:
    if seq.level == WORD:
        return UnitSequence(seq.article_id, list(seq.units), WORD)
    words = [w for u in seq.units for w in split_unit(u)]
    return UnitSequence(seq.article_id, words, WORD)


def label_corpus(corpus: Iterable[UnitSequence], lexicon: PhraseLexicon) -> list[UnitSequence]:
    return [label(s, lexicon) for s in corpus]


@dataclass
class Vocabulary:
    """Unit inventory. Index 0 is always UNK."""

    itos: list[str]
    counts: dict[str, int]

    def __post_init__(self):
        if not self.itos or self.itos[0] != UNK:
            raise ValueError("vocabulary must start with UNK")
        self.stoi = {u: i for i, u in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("vocabulary units must be unique")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, unit: object) -> bool:
        return unit in self.stoi

    def index(self, unit: str) -> int:
        return self.stoi.get(unit, 0)

    def encode(self, units: Iterable[str]) -> list[int]:
        get = self.stoi.get
        return [get(u, 0) for u in units]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"itos": self.itos, "counts": self.counts}, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(d["itos"], d["counts"])


def build_vocab(corpus: Iterable[UnitSequence | Sequence[str]], min_count: int = 3) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter = Counter()
    for seq in corpus:
        counts.update(seq.units if isinstance(seq, UnitSequence) else seq)
    unk_count = counts.pop(UNK, 0)
    kept = sorted((u for u, c in counts.items() if c >= min_count), key=lambda u: (-counts[u], u))
    unk_count += sum(c for u, c in counts.items() if c < min_count)
    out_counts = {UNK: unk_count, **{u: counts[u] for u in kept}}
    return Vocabulary([UNK, *kept], out_counts)
