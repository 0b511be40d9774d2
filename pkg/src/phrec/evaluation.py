"""Ranking metrics: MRR, accuracy and hit ratio over scored instances."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import DataIntegrityError


def rank_positive(s_pos: float, s_negs: Sequence[float]) -> int:
    """1 + number of negatives scoring at least as high as the positive.

    Ties count against the positive, so equal scores never inflate a metric.
    """
    return 1 + sum(1 for s in s_negs if s >= s_pos)


def mrr(ranks: Sequence[int]) -> float:
    return sum(1.0 / r for r in ranks) / len(ranks)


def accuracy(ranks: Sequence[int]) -> float:
    return sum(1 for r in ranks if r == 1) / len(ranks)


def hit_at_k(ranks: Sequence[int], n: int) -> float:
    return sum(1 for r in ranks if r <= n) / len(ranks)


@dataclass
class EvalReport:
    mrr: float
    acc: float
    h3: float
    h5: float
    n_instances: int
    m: int
    ranks: list[int] = field(default_factory=list, repr=False)

    @classmethod
    def from_ranks(cls, ranks: Sequence[int], m: int) -> "EvalReport":
        if not ranks:
            raise DataIntegrityError("cannot evaluate an empty test set")
        ranks = list(ranks)
        return cls(mrr(ranks), accuracy(ranks), hit_at_k(ranks, 3), hit_at_k(ranks, 5), len(ranks), m, ranks)

    def metrics(self) -> dict[str, float]:
        return {"mrr": self.mrr, "acc": self.acc, "h3": self.h3, "h5": self.h5}

    def to_json(self, with_ranks: bool = False) -> dict:
        d = asdict(self)
        if not with_ranks:
            d.pop("ranks")
        return d

    def save(self, path: str | Path, with_ranks: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_json(with_ranks), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def table(self, title: str = "") -> str:
        head = f"{title}\n" if title else ""
        return (
            head
            + "   MRR    Acc    h@3    h@5      |U|  m\n"
            + f"  {self.mrr:.3f}  {self.acc:.3f}  {self.h3:.3f}  {self.h5:.3f}  {self.n_instances:7d}  {self.m}"
        )


ScoreFn = Callable[[object], tuple[float, Sequence[float]]]


def evaluate_scores(scored: Iterable[tuple[float, Sequence[float]]]) -> EvalReport:
    ranks, m = [], 0
    for s_pos, s_negs in scored:
        ranks.append(rank_positive(s_pos, s_negs))
        m = max(m, len(s_negs))
    return EvalReport.from_ranks(ranks, m)


def evaluate_run(score_fn: ScoreFn, instances: Sequence) -> EvalReport:
    """Score every instance with ``score_fn(instance) -> (s_pos, s_negs)`` and aggregate."""
    if not instances:
        raise DataIntegrityError("cannot evaluate an empty test set")
    return evaluate_scores(score_fn(inst) for inst in instances)


def evaluate_model(model, instances: Sequence) -> EvalReport:
    return evaluate_run(lambda i: model.instance_scores(i.current, i.positive, i.negatives), instances)
