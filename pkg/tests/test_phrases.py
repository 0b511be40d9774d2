import math
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phrec.phrases import (
    CorpusStats,
    LexiconParseError,
    PhraseCandidate,
    PhraseLexicon,
    combine_quality,
    filter_lexicon,
    generate_candidates,
    import_lexicon,
    mine_phrases,
    npmi_and_completeness,
    parse_lexicon,
    score_candidate,
)

corpora = st.lists(st.lists(st.sampled_from("abcd"), max_size=12), max_size=6)


def brute_counts(corpus, max_n):
    c = Counter()
    for doc in corpus:
        for i in range(len(doc)):
            for j in range(i + 2, min(len(doc), i + max_n) + 1):
                c[tuple(doc[i:j])] += 1
    return c


def test_candidates_simple_count():
    cands = generate_candidates([["a", "b", "a", "b"]], max_n=2, min_freq=2)
    assert [(c.units, c.freq) for c in cands] == [(("a", "b"), 2)]


def test_candidates_none_repeat():
    assert generate_candidates([["a", "b", "c"]], min_freq=2) == []
    assert generate_candidates([], min_freq=1) == []


def test_candidates_new_york_city():
    corpus = [["new", "york", "city"]] * 100
    got = {c.text: c.freq for c in generate_candidates(corpus, max_n=3, min_freq=5)}
    assert got == {"new york": 100, "york city": 100, "new york city": 100}


def test_candidates_do_not_cross_articles():
    assert generate_candidates([["a"], ["b"]] * 5, max_n=2, min_freq=1) == []


@given(corpora, st.integers(2, 5), st.integers(1, 3))
def test_candidates_match_brute_force(corpus, max_n, min_freq):
    want = {g: c for g, c in brute_counts(corpus, max_n).items() if c >= min_freq}
    got = {c.units: c.freq for c in generate_candidates(corpus, max_n, min_freq)}
    assert got == want


def test_candidate_arguments_validated():
    with pytest.raises(ValueError):
        generate_candidates([["a"]], max_n=1)
    with pytest.raises(ValueError):
        generate_candidates([["a"]], min_freq=0)


def test_quality_perfect_collocation():
    corpus = [["new", "york"]] * 10 + [["x", "y", "z"]] * 3
    stats = CorpusStats.from_sequences(corpus, 2)
    npmi, comp = npmi_and_completeness(("new", "york"), stats)
    assert npmi == pytest.approx(1.0, rel=1e-12)
    assert comp == 1.0
    assert score_candidate(("new", "york"), stats) == pytest.approx(1.0)


def test_quality_independent_words_is_zero():
    # P(ab) = 1/4 = P(a) P(b) when the corpus is "a b" twice among 8 tokens built to match
    stats = CorpusStats(Counter({("a",): 4, ("b",): 4, ("a", "b"): 2}), 8, 2)
    npmi, _ = npmi_and_completeness(("a", "b"), stats)
    assert npmi == pytest.approx(0.0, abs=1e-12)
    assert score_candidate(PhraseCandidate(("a", "b"), 2), stats) == 0.0


def test_combine_quality_example():
    assert combine_quality(0.64, 0.25) == pytest.approx(0.4, rel=1e-12)
    assert combine_quality(-0.3, 1.0) == 0.0
    assert combine_quality(1.5, 1.0) == 1.0


def test_completeness_uses_subgram_counts():
    # "new york city" 4 times, "new york" 8 times, "york city" 4 times
    corpus = [["new", "york", "city"]] * 4 + [["new", "york", "state"]] * 4
    stats = CorpusStats.from_sequences(corpus, 3)
    _, comp = npmi_and_completeness(("new", "york", "city"), stats)
    assert comp == pytest.approx(4 / min(8, 4))
    _, comp = npmi_and_completeness(("new", "york"), stats)
    assert comp == 1.0


@given(corpora, st.integers(2, 6))
def test_quality_in_unit_interval_and_scale_invariant(corpus, k):
    stats = CorpusStats.from_sequences(corpus, 3)
    scaled = CorpusStats.from_sequences([d for d in corpus for _ in range(k)], 3)
    for c in generate_candidates(corpus, 3, 1):
        q = score_candidate(c, stats)
        assert 0.0 <= q <= 1.0
        a, b = npmi_and_completeness(c.units, stats), npmi_and_completeness(c.units, scaled)
        assert a[0] == pytest.approx(b[0], rel=1e-9, abs=1e-12)
        assert a[1] == pytest.approx(b[1], rel=1e-12)


def test_score_rejects_unseen():
    stats = CorpusStats.from_sequences([["a", "b"]], 2)
    with pytest.raises(ValueError):
        score_candidate(("a", "c"), stats)


def test_filter_threshold_inclusive():
    cands = [PhraseCandidate(("a", "b"), 5, 0.5), PhraseCandidate(("c", "d"), 5, 0.4999)]
    lex = filter_lexicon(cands, 0.5)
    assert ("a", "b") in lex and ("c", "d") not in lex
    assert len(filter_lexicon([], 0.5)) == 0
    with pytest.raises(ValueError):
        filter_lexicon(cands, 1.5)


def test_lexicon_invariant_enforced():
    with pytest.raises(ValueError):
        PhraseLexicon({("a", "b"): 0.2}, 0.5)


def test_parse_lexicon_examples():
    lex = parse_lexicon(["0.93\tmachine learning\n", "0.2\tweak phrase\n", "\n"])
    assert lex.entries == {("machine", "learning"): 0.93}
    with pytest.raises(LexiconParseError) as exc:
        parse_lexicon(["abc\tfoo"])
    assert exc.value.lineno == 1
    with pytest.raises(LexiconParseError, match="line 2"):
        parse_lexicon(["0.9\tok", "0.9\t   "])
    with pytest.raises(LexiconParseError):
        parse_lexicon(["0.9 no tab"])


def test_lexicon_file_round_trip(tmp_path):
    lex = PhraseLexicon({("a", "b"): 0.75, ("c", "d", "e"): 0.5}, 0.5)
    lex.save(tmp_path / "l.tsv")
    assert import_lexicon(tmp_path / "l.tsv").entries == lex.entries
    assert lex.max_len == 3


def test_mine_finds_planted_phrase():
    corpus = [["the", "machine", "learning", "model", f"x{i}"] for i in range(20)]
    corpus += [["machine", f"y{i}", "learning"] for i in range(3)]
    lex, cands = mine_phrases(corpus, max_n=3, min_freq=5)
    assert ("machine", "learning") in lex
    assert all(c.freq >= 5 for c in cands)
    assert all(lex.entries[p] >= 0.5 for p in lex)
    assert math.isclose(max(c.quality for c in cands), max(lex.entries.values()))
