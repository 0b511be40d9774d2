"""Pairwise hinge-loss training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError
from ..nn.optim import make_optimizer
from .config import RankerConfig
from .models import BiLSTMSA, PairRanker, build_model

log = logging.getLogger(__name__)


@dataclass
class EncodedInstance:
    """Unit-index arrays for one positive pair and its negatives (shared current article)."""

    current: np.ndarray
    positive: np.ndarray
    negatives: list[np.ndarray]
    current_id: str = ""
    positive_id: str = ""
    negative_ids: list[str] = field(default_factory=list)


def hinge_loss(s_pos: float, s_negs: Sequence[float], margin: float = 1.0) -> float:
    if len(s_negs) == 0:
        raise ValueError("hinge loss needs at least one negative score")
    if margin <= 0:
        raise ValueError("margin must be positive")
    # np.maximum propagates NaN where the builtin max would silently drop it
    return float(np.sum(np.maximum(0.0, margin - s_pos + np.asarray(s_negs, dtype=np.float64)))) / len(s_negs)


def hinge_grad(s_pos: float, s_negs: Sequence[float], margin: float = 1.0) -> tuple[float, list[float]]:
    """Sub-gradient of :func:`hinge_loss` w.r.t. the positive and each negative score."""
    m = len(s_negs)
    active = [1.0 if margin - s_pos + s > 0 else 0.0 for s in s_negs]
    return -sum(active) / m, [a / m for a in active]


@dataclass
class TrainResult:
    model: PairRanker
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    traces: dict = field(default_factory=dict)


def instance_loss_and_backward(model: PairRanker, inst: EncodedInstance, margin: float, weight: float) -> float:
    """Forward one instance, back-propagate ``weight`` x its loss. Returns the unweighted loss."""
    arts = [inst.current, inst.positive, *inst.negatives]
    enc = [model.encode_ids(ids) for ids in arts]
    rc = enc[0][0]
    heads = [model.score_reps(rc, rep) for rep, _ in enc[1:]]
    scores = [float(s) for s, _ in heads]
    loss = hinge_loss(scores[0], scores[1:], margin)
    extra = sum(model.extra_loss(c) for _, c in enc if c is not None)
    dpos, dnegs = hinge_grad(scores[0], scores[1:], margin)
    dreps: list = [None] * len(arts)

    def add(k, d):
        if d is None:
            return
        dreps[k] = d if dreps[k] is None else dreps[k] + d

    for k, ((_, hc), ds) in enumerate(zip(heads, [dpos, *dnegs]), start=1):
        if hc is None or ds == 0.0:
            continue
        dc, dr = model.head_backward(ds * weight, hc)
        add(0, dc)
        add(k, dr)
    penalized = isinstance(model, BiLSTMSA) and model.attn.penalty
    for k, (ids, (rep, cache)) in enumerate(zip(arts, enc)):
        if cache is None:
            continue
        if dreps[k] is None:
            if not penalized:
                continue
            dreps[k] = np.zeros_like(rep)
        if penalized:
            dx = model.encode_backward(dreps[k], cache, penalty_weight=weight)
        else:
            dx = model.encode_backward(dreps[k], cache)
        model.embed_backward(ids, dx)
    return loss + extra


def mean_reciprocal_rank(model: PairRanker, instances: Sequence[EncodedInstance]) -> float:
    from ..evaluation import rank_positive

    if not instances:
        return 0.0
    total = 0.0
    for inst in instances:
        s_pos, s_negs = model.instance_scores(inst.current, inst.positive, inst.negatives)
        total += 1.0 / rank_positive(s_pos, s_negs)
    return total / len(instances)


def train(
    config: RankerConfig,
    train_set: Sequence[EncodedInstance],
    val_set: Sequence[EncodedInstance],
    embeddings: np.ndarray,
    tracked: dict[str, np.ndarray] | None = None,
    on_epoch: Callable[[int, PairRanker], None] | None = None,
) -> TrainResult:
    """Mini-batch hinge training with the model's optimizer; keeps the best-validation weights.

    ``tracked`` maps article ids to unit-index arrays whose attention matrices
    are recorded after every epoch (BiLSTM-SA only).
    """
    model = build_model(config, embeddings)
    opt = make_optimizer(config.optimizer, model.parameters(), config.lr)
    rng = np.random.default_rng(config.seed + 1)
    result = TrainResult(model)
    best_state = model.state_dict()
    best_mrr = -math.inf
    if isinstance(model, BiLSTMSA) and tracked:
        result.traces = {aid: [] for aid in tracked}
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size), start=1):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            opt.zero_grad()
            w = 1.0 / len(batch)
            batch_loss = sum(instance_loss_and_backward(model, inst, config.margin, w) for inst in batch)
            if not math.isfinite(batch_loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}, batch {b}")
            for p in opt.params:
                if not np.all(np.isfinite(p.grad)):
                    raise NumericalError(f"non-finite gradient at epoch {epoch}, batch {b}")
            opt.step()
            total += batch_loss
        train_loss = total / max(n, 1)
        val_mrr = mean_reciprocal_rank(model, val_set) if val_set else float("nan")
        result.history.append({"epoch": epoch, "train_loss": train_loss, "val_mrr": val_mrr})
        log.info("%s epoch %d loss %.5f val_mrr %.4f", config.model, epoch, train_loss, val_mrr)
        if result.traces:
            for aid, ids in tracked.items():
                result.traces[aid].append((epoch, model.attention(ids)))
        score = val_mrr if val_set else -train_loss
        if score > best_mrr:
            best_mrr = score
            best_state = model.state_dict()
            result.best_epoch = epoch
        if on_epoch is not None:
            on_epoch(epoch, model)
    model.load_state_dict(best_state)
    return result
