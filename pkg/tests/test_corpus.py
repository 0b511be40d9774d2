import json
import unicodedata

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phrec.corpus import (
    Article,
    ArticleStore,
    CorpusError,
    DuplicateArticleError,
    UnitSequence,
    ingest_articles,
    load_sequences,
    normalize_text,
    save_sequences,
    tokenize_store,
    truncate,
)
from phrec.errors import DataIntegrityError


@pytest.mark.parametrize(
    "raw, want",
    [
        ("Hello, world!", ["hello", "world"]),
        ("", []),
        ("state-of-the-art A.I.", ["state", "of", "the", "art", "a", "i"]),
        ("«Guillemets» and “quotes”…", ["guillemets", "and", "quotes"]),
        ("  tabs\tand\nnewlines ", ["tabs", "and", "newlines"]),
    ],
)
def test_normalize_examples(raw, want):
    assert normalize_text(raw) == want


@given(st.text())
def test_normalize_has_no_punctuation_or_empty_tokens(raw):
    for tok in normalize_text(raw):
        assert tok
        assert not any(unicodedata.category(c).startswith("P") for c in tok)


def test_pre_tokenizer_hook_runs_first():
    seg = lambda s: s.replace("新聞推薦", "新聞 推薦")
    assert normalize_text("新聞推薦。", seg) == ["新聞", "推薦"]


def _seq(n):
    return UnitSequence("a", [f"w{i}" for i in range(n)])


@pytest.mark.parametrize("n, k, want", [(600, 512, 512), (10, 512, 10), (512, 512, 512)])
def test_truncate_examples(n, k, want):
    s = _seq(n)
    t = truncate(s, k)
    assert len(t) == want
    assert t.units == s.units[:want]


@given(st.integers(0, 40), st.integers(1, 50))
def test_truncate_idempotent(n, k):
    once = truncate(_seq(n), k)
    assert truncate(once, k).units == once.units


def test_truncate_rejects_zero():
    with pytest.raises(ValueError):
        truncate(_seq(3), 0)


def test_unit_sequence_rejects_empty_unit():
    with pytest.raises(CorpusError):
        UnitSequence("a", ["x", ""])


def _rec(i, **kw):
    d = {"id": f"a{i}", "title": "T", "body": "b", "timestamp": i}
    d.update(kw)
    return json.dumps(d)


def test_ingest_two_records():
    store = ingest_articles([_rec(1), _rec(2)])
    assert len(store) == 2
    assert store["a2"].timestamp == 2


def test_ingest_missing_body_reports_line():
    rec = json.dumps({"id": "x", "title": "t", "timestamp": 0})
    with pytest.raises(CorpusError, match="line 2: missing field"):
        ingest_articles([_rec(1), rec])


def test_ingest_duplicate_id():
    with pytest.raises(DuplicateArticleError, match="a1"):
        ingest_articles([_rec(1), _rec(1)])


@pytest.mark.parametrize("bad", ["{not json", json.dumps([1]), _rec(1, timestamp=-1), _rec(1, timestamp="3")])
def test_ingest_malformed(bad):
    with pytest.raises(DataIntegrityError, match="line 1"):
        ingest_articles([bad])


def test_store_round_trip_is_identical(tmp_path):
    arts = [Article("a1", "Ünïcode title", "body, with · stuff", 5), Article("b", "", "x", 0)]
    store = ArticleStore()
    for a in arts:
        store.add(a)
    store.save(tmp_path / "s.jsonl")
    again = ArticleStore.load(tmp_path / "s.jsonl")
    assert [again[a.id] for a in arts] == arts
    again.save(tmp_path / "t.jsonl")
    assert (tmp_path / "s.jsonl").read_bytes() == (tmp_path / "t.jsonl").read_bytes()


def test_tokenize_prepends_title_by_default():
    store = ingest_articles([_rec(1, title="Big News", body="More text.")])
    assert tokenize_store(store)[0].units == ["big", "news", "more", "text"]
    assert tokenize_store(store, with_title=False)[0].units == ["more", "text"]


def test_sequence_file_round_trip(tmp_path):
    seqs = [UnitSequence("a", ["x", "y_z"], "phrase"), UnitSequence("b", [], "word")]
    save_sequences(seqs, tmp_path / "u.jsonl")
    assert load_sequences(tmp_path / "u.jsonl") == seqs
    (tmp_path / "bad.jsonl").write_text('{"article_id": "a"}\n')
    with pytest.raises(CorpusError, match="line 1"):
        load_sequences(tmp_path / "bad.jsonl")
