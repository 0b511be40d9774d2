"""View/click logs to (current, next) article pairs with sampled negatives."""

from __future__ import annotations

import json
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataIntegrityError

VIEW = "view"
CLICK = "click"
DEFAULT_CAP = 8
DEFAULT_M = 4


class IntegrityError(DataIntegrityError):
    pass


@dataclass(frozen=True)
class Event:
    user_id: str
    article_id: str
    kind: str
    timestamp: int
    impressions: tuple[str, ...] = ()

    def to_json(self) -> dict:
        d = {"user_id": self.user_id, "article_id": self.article_id, "kind": self.kind, "timestamp": self.timestamp}
        if self.impressions:
            d["impressions"] = list(self.impressions)
        return d


@dataclass
class EventLog:
    users: dict[str, list[Event]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.users)

    def impressions_of(self, article_id: str) -> list[str]:
        """Every article shown under ``article_id`` across all users, first-seen order."""
        seen: dict[str, None] = {}
        for events in self.users.values():
            for e in events:
                if e.kind == VIEW and e.article_id == article_id:
                    seen.update(dict.fromkeys(e.impressions))
        return list(seen)

    def article_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for events in self.users.values():
            for e in events:
                seen[e.article_id] = None
                seen.update(dict.fromkeys(e.impressions))
        return list(seen)


def _parse_event(obj, lineno: int) -> Event:
    if not isinstance(obj, dict):
        raise DataIntegrityError(f"line {lineno}: expected a JSON object")
    try:
        kind = obj["kind"]
        ev = Event(str(obj["user_id"]), str(obj["article_id"]), kind, int(obj["timestamp"]),
                   tuple(str(x) for x in obj.get("impressions") or ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataIntegrityError(f"line {lineno}: malformed event ({exc})") from None
    if kind not in (VIEW, CLICK):
        raise DataIntegrityError(f"line {lineno}: unknown event kind {kind!r}")
    return ev


def group_events(events: Iterable[Event], check: bool = True) -> EventLog:
    by_user: dict[str, list[tuple[int, int, Event]]] = defaultdict(list)
    for k, e in enumerate(events):
        by_user[e.user_id].append((e.timestamp, k, e))
    log = EventLog({u: [e for _, _, e in sorted(v)] for u, v in sorted(by_user.items())})
    if check:
        problems = integrity_problems(log)
        if problems:
            raise IntegrityError("click without a matching impression: " + "; ".join(problems))
    return log


def integrity_problems(log: EventLog) -> list[str]:
    out = []
    for user, events in log.users.items():
        last_view = None
        for e in events:
            if e.kind == VIEW:
                last_view = e
            elif last_view is None or e.article_id not in last_view.impressions:
                out.append(f"user={user} article={e.article_id} t={e.timestamp}")
    return out


def parse_event_log(source: str | Path | Iterable[str], check: bool = True) -> EventLog:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    events = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataIntegrityError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        events.append(_parse_event(obj, lineno))
    return group_events(events, check)


def save_event_log(log: EventLog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for events in log.users.values():
            for e in events:
                fh.write(json.dumps(e.to_json()) + "\n")


@dataclass(frozen=True)
class ArticlePair:
    a_c: str
    a_r: str
    label: str = "positive"
    impressions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.a_c == self.a_r:
            raise ValueError(f"pair with identical articles {self.a_c!r}")


@dataclass
class EvalInstance:
    positive: ArticlePair
    negatives: list[ArticlePair]

    def __post_init__(self):
        if not self.negatives:
            raise ValueError("an instance needs at least one negative")

    @property
    def a_c(self) -> str:
        return self.positive.a_c

    def to_json(self) -> dict:
        return {"a_c": self.positive.a_c, "pos": self.positive.a_r, "negs": [n.a_r for n in self.negatives]}

    @classmethod
    def from_json(cls, d: dict) -> "EvalInstance":
        return cls(ArticlePair(d["a_c"], d["pos"]), [ArticlePair(d["a_c"], r, "negative") for r in d["negs"]])


@dataclass
class DatasetSplit:
    train: list[EvalInstance] = field(default_factory=list)
    val: list[EvalInstance] = field(default_factory=list)
    test: list[EvalInstance] = field(default_factory=list)

    def save(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in ("train", "val", "test"):
            save_instances(getattr(self, name), out_dir / f"{name}.jsonl")

    @classmethod
    def load(cls, out_dir: str | Path) -> "DatasetSplit":
        out_dir = Path(out_dir)
        return cls(*(load_instances(out_dir / f"{n}.jsonl") for n in ("train", "val", "test")))


def save_instances(instances: Iterable[EvalInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_json()) + "\n")


def load_instances(path: str | Path) -> list[EvalInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(EvalInstance.from_json(json.loads(line)))
                except (KeyError, ValueError, TypeError) as exc:
                    raise DataIntegrityError(f"{path}: line {lineno}: bad instance ({exc})") from None
    return out


def _latest(pairs: list[ArticlePair], cap: int | None) -> list[ArticlePair]:
    if cap is None:
        return pairs
    if cap < 1:
        raise ValueError("cap must be >= 1")
    return pairs[-cap:]


def build_click_pairs(events: Sequence[Event], cap: int | None = DEFAULT_CAP) -> list[ArticlePair]:
    """(a_i, a_{i+1}) whenever a view of a_i is immediately followed by a click on a_{i+1}."""
    pairs = []
    for prev, nxt in zip(events, events[1:]):
        if prev.kind == VIEW and nxt.kind == CLICK and prev.article_id != nxt.article_id:
            pairs.append(ArticlePair(prev.article_id, nxt.article_id, impressions=prev.impressions))
    return _latest(pairs, cap)


def build_view_pairs(events: Sequence[Event], cap: int | None = DEFAULT_CAP) -> list[ArticlePair]:
    """Successive viewed articles; interleaved clicks do not break adjacency."""
    views = [e for e in events if e.kind == VIEW]
    pairs = [
        ArticlePair(a.article_id, b.article_id, impressions=a.impressions)
        for a, b in zip(views, views[1:])
        if a.article_id != b.article_id
    ]
    return _latest(pairs, cap)


def _pair_rng(seed: int, pair: ArticlePair, salt: int = 0) -> np.random.Generator:
    key = zlib.crc32(f"{pair.a_c}\x1f{pair.a_r}\x1f{salt}".encode("utf-8"))
    return np.random.default_rng([seed, key])


def attach_negatives(
    pair: ArticlePair,
    log: EventLog | None,
    m: int = DEFAULT_M,
    seed: int = 0,
    corpus_ids: Sequence[str] | None = None,
    salt: int = 0,
) -> EvalInstance:
    """Sample ``m`` negatives from the un-clicked impressions of ``pair.a_c``.

    The pair's own impression list is used when present, otherwise every
    impression logged under a_c. Shortfalls are filled uniformly from
    ``corpus_ids`` (default: every article known to the log).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = _pair_rng(seed, pair, salt)
    shown = pair.impressions or (tuple(log.impressions_of(pair.a_c)) if log is not None else ())
    exclude = {pair.a_c, pair.a_r}
    pool = list(dict.fromkeys(a for a in shown if a not in exclude))
    if len(pool) > m:
        chosen = [pool[i] for i in sorted(rng.choice(len(pool), size=m, replace=False))]
    else:
        chosen = pool
    if len(chosen) < m:
        if corpus_ids is None:
            corpus_ids = log.article_ids() if log is not None else []
        taken = exclude | set(chosen)
        fill = sorted(a for a in set(corpus_ids) if a not in taken)
        need = m - len(chosen)
        if len(fill) < need:
            raise DataIntegrityError(f"not enough articles to draw {m} negatives for {pair.a_c!r}")
        chosen += [fill[i] for i in rng.choice(len(fill), size=need, replace=False)]
    return EvalInstance(pair, [ArticlePair(pair.a_c, a, "negative") for a in chosen])


def split(user_pairs: dict[str, list]) -> DatasetSplit:
    """Per user: last item to test, second-to-last to val, the rest to train."""
    out = DatasetSplit()
    for user in user_pairs:
        items = list(user_pairs[user])
        if not items:
            continue
        out.test.append(items[-1])
        if len(items) >= 2:
            out.val.append(items[-2])
        out.train.extend(items[:-2])
    return out


def build_dataset(
    log: EventLog,
    behavior: str = CLICK,
    m: int = DEFAULT_M,
    cap: int | None = DEFAULT_CAP,
    seed: int = 0,
    corpus_ids: Sequence[str] | None = None,
) -> DatasetSplit:
    if behavior not in (CLICK, VIEW):
        raise ValueError(f"behavior must be {CLICK!r} or {VIEW!r}")
    builder = build_click_pairs if behavior == CLICK else build_view_pairs
    if corpus_ids is None:
        corpus_ids = log.article_ids()
    per_user = {}
    for user, events in log.users.items():
        pairs = builder(events, cap)
        per_user[user] = [
            attach_negatives(p, log, m, seed, corpus_ids, salt=k) for k, p in enumerate(pairs)
        ]
    return split(per_user)
