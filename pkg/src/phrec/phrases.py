"""Phrase candidate counting, quality scoring and lexicon I/O.

Quality is the geometric mean of two corpus signals:

* clamped normalized PMI of the n-gram against its unigrams, and
* completeness, the n-gram count over the smaller count of its two
  (n-1)-gram sub-spans (the unigrams when n == 2).

Either signal being weak pulls the score down. Externally scored lists in
the usual ``score<TAB>phrase`` layout can be imported instead.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataIntegrityError

DEFAULT_THRESHOLD = 0.5
DEFAULT_MAX_N = 6
DEFAULT_MIN_FREQ = 5

Phrase = tuple[str, ...]


class LexiconParseError(DataIntegrityError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass
class PhraseCandidate:
    units: Phrase
    freq: int
    quality: float = 0.0

    @property
    def text(self) -> str:
        return " ".join(self.units)


@dataclass
class CorpusStats:
    """Raw n-gram counts for 1 <= n <= max_n, never crossing article boundaries."""

    counts: Counter
    total: int
    max_n: int

    @classmethod
    def from_sequences(cls, corpus: Iterable[Sequence[str]], max_n: int) -> "CorpusStats":
        counts: Counter = Counter()
        total = 0
        for units in corpus:
            units = list(units)
            total += len(units)
            for n in range(1, max_n + 1):
                for i in range(len(units) - n + 1):
                    counts[tuple(units[i : i + n])] += 1
        return cls(counts, total, max_n)

    def freq(self, ngram: Phrase) -> int:
        return self.counts.get(tuple(ngram), 0)

    def prob(self, ngram: Phrase) -> float:
        return self.freq(ngram) / self.total if self.total else 0.0


def generate_candidates(
    corpus: Iterable[Sequence[str]],
    max_n: int = DEFAULT_MAX_N,
    min_freq: int = DEFAULT_MIN_FREQ,
    stats: CorpusStats | None = None,
) -> list[PhraseCandidate]:
    if max_n < 2:
        raise ValueError("max_n must be >= 2")
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    if stats is None:
        stats = CorpusStats.from_sequences(corpus, max_n)
    out = [
        PhraseCandidate(gram, c)
        for gram, c in stats.counts.items()
        if 2 <= len(gram) <= max_n and c >= min_freq
    ]
    out.sort(key=lambda c: (len(c.units), c.units))
    return out


def combine_quality(npmi: float, completeness: float) -> float:
    npmi_pos = min(max(npmi, 0.0), 1.0)
    completeness = min(max(completeness, 0.0), 1.0)
    return math.sqrt(npmi_pos * completeness)


def npmi_and_completeness(units: Phrase, stats: CorpusStats) -> tuple[float, float]:
    units = tuple(units)
    if len(units) < 2:
        raise ValueError("phrase candidates need at least two units")
    p_c = stats.prob(units)
    if p_c <= 0.0:
        raise ValueError(f"candidate {' '.join(units)!r} never occurs in the corpus")
    log_indep = 0.0
    for u in units:
        p_u = stats.prob((u,))
        if p_u <= 0.0:
            raise ValueError(f"unit {u!r} has zero probability")
        log_indep += math.log(p_u)
    pmi = math.log(p_c) - log_indep
    denom = -math.log(p_c)
    # p_c == 1 only for a corpus that is literally this one n-gram
    npmi = 1.0 if denom == 0.0 else pmi / denom
    sub = min(stats.freq(units[:-1]), stats.freq(units[1:]))
    completeness = stats.freq(units) / sub
    return npmi, completeness


def score_candidate(candidate: PhraseCandidate | Phrase, stats: CorpusStats) -> float:
    units = candidate.units if isinstance(candidate, PhraseCandidate) else candidate
    return combine_quality(*npmi_and_completeness(units, stats))


@dataclass
class PhraseLexicon:
    entries: dict[Phrase, float] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        bad = [p for p, q in self.entries.items() if q < self.threshold]
        if bad:
            raise ValueError(f"{len(bad)} entries below threshold {self.threshold}")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, phrase: object) -> bool:
        return tuple(phrase) in self.entries  # type: ignore[arg-type]

    def __iter__(self):
        return iter(self.entries)

    @property
    def max_len(self) -> int:
        return max((len(p) for p in self.entries), default=0)

    def sorted_entries(self) -> list[tuple[Phrase, float]]:
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for phrase, q in self.sorted_entries():
                fh.write(f"{q:.6f}\t{' '.join(phrase)}\n")


def filter_lexicon(
    candidates: Iterable[PhraseCandidate], threshold: float = DEFAULT_THRESHOLD
) -> PhraseLexicon:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    entries: dict[Phrase, float] = {}
    for c in candidates:
        if c.quality >= threshold:
            key = tuple(c.units)
            entries[key] = max(c.quality, entries.get(key, c.quality))
    return PhraseLexicon(entries, threshold)


def parse_lexicon(lines: Iterable[str], threshold: float = DEFAULT_THRESHOLD) -> PhraseLexicon:
    entries: dict[Phrase, float] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n\r")
        if not line.strip():
            continue
        score_s, sep, phrase_s = line.partition("\t")
        if not sep:
            raise LexiconParseError(lineno, "expected 'score<TAB>phrase'")
        try:
            score = float(score_s)
        except ValueError:
            raise LexiconParseError(lineno, f"non-numeric score {score_s!r}") from None
        if not math.isfinite(score):
            raise LexiconParseError(lineno, f"non-finite score {score_s!r}")
        phrase = tuple(phrase_s.split())
        if not phrase:
            raise LexiconParseError(lineno, "empty phrase")
        if score >= threshold:
            entries[phrase] = max(score, entries.get(phrase, score))
    return PhraseLexicon(entries, threshold)


def import_lexicon(path: str | Path, threshold: float = DEFAULT_THRESHOLD) -> PhraseLexicon:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh, threshold)


def mine_phrases(
    corpus: Iterable[Sequence[str]],
    max_n: int = DEFAULT_MAX_N,
    min_freq: int = DEFAULT_MIN_FREQ,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[PhraseLexicon, list[PhraseCandidate]]:
    """Count, score and filter in one pass. Returns the lexicon and all scored candidates."""
    stats = CorpusStats.from_sequences(corpus, max_n)
    cands = generate_candidates((), max_n, min_freq, stats=stats)
    for c in cands:
        c.quality = score_candidate(c, stats)
    return filter_lexicon(cands, threshold), cands
