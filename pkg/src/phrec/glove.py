"""Window-weighted co-occurrence counting and GloVe training (AdaGrad)."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import UnitSequence
from .errors import NumericalError
from .labeler import UNK, Vocabulary

log = logging.getLogger(__name__)

DEFAULT_DIM = 50
DEFAULT_WINDOW = 5
DEFAULT_X_MAX = 100.0
DEFAULT_ALPHA = 0.75
DEFAULT_LR = 0.05
DEFAULT_EPOCHS = 25


@dataclass
class CooccurrenceTable:
    """Sparse co-occurrence weights in COO form, sorted by (row, col)."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    vocab_size: int

    def __len__(self) -> int:
        return len(self.values)

    def get(self, i: int, j: int) -> float:
        hit = np.nonzero((self.rows == i) & (self.cols == j))[0]
        return float(self.values[hit[0]]) if len(hit) else 0.0

    def to_dict(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.values)}

    @classmethod
    def from_dict(cls, d: dict[tuple[int, int], float], vocab_size: int) -> "CooccurrenceTable":
        keys = sorted(k for k, v in d.items() if v > 0)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([d[k] for k in keys], dtype=np.float64)
        return cls(rows, cols, vals, vocab_size)


def build_cooccurrence(
    corpus: Iterable[UnitSequence | Sequence[str]], vocab: Vocabulary, window: int = DEFAULT_WINDOW
) -> CooccurrenceTable:
    if window < 1:
        raise ValueError("window must be >= 1")
    acc: dict[tuple[int, int], float] = defaultdict(float)
    for seq in corpus:
        ids = vocab.encode(seq.units if isinstance(seq, UnitSequence) else seq)
        for pos, i in enumerate(ids):
            for d in range(1, window + 1):
                if pos + d >= len(ids):
                    break
                j = ids[pos + d]
                acc[i, j] += 1.0 / d
                acc[j, i] += 1.0 / d
    return CooccurrenceTable.from_dict(acc, len(vocab))


def weighting_f(x, x_max: float = DEFAULT_X_MAX, alpha: float = DEFAULT_ALPHA):
    """(x / x_max) ** alpha below x_max, 1 above. Works on scalars and arrays."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x < x_max, (np.maximum(x, 0.0) / x_max) ** alpha, 1.0)
    return float(out) if out.ndim == 0 else out


def entry_loss_and_grads(w, wc, b, bc, x, x_max=DEFAULT_X_MAX, alpha=DEFAULT_ALPHA):
    """Loss f(x)(w.wc + b + bc - ln x)^2 of one entry and its gradients (dw, dwc, db, dbc)."""
    fx = weighting_f(x, x_max, alpha)
    diff = float(w @ wc) + b + bc - math.log(x)
    g = 2.0 * fx * diff
    return fx * diff * diff, g * wc, g * w, g, g


@dataclass
class EmbeddingTable:
    units: list[str]
    main: np.ndarray
    context: np.ndarray
    bias: np.ndarray
    context_bias: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.main.shape[1]

    def __post_init__(self):
        self.index = {u: i for i, u in enumerate(self.units)}

    def vectors(self) -> np.ndarray:
        return self.main + self.context

    def vector(self, unit: str) -> np.ndarray:
        if unit not in self.index:
            raise KeyError(f"unit {unit!r} not in embedding table")
        return self.vectors()[self.index[unit]]

    def save(self, path: str | Path) -> None:
        save_vectors(path, self.units, self.vectors())


def save_vectors(path: str | Path, units: Sequence[str], vecs: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(units)} {vecs.shape[1]}\n")
        for u, v in zip(units, vecs):
            fh.write(u + " " + " ".join(repr(float(x)) for x in v) + "\n")


def load_vectors(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        n, dim = int(header[0]), int(header[1])
        units, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"{path}: expected {dim} values for {parts[0]!r}")
            units.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(units) != n:
        raise ValueError(f"{path}: header says {n} units, found {len(units)}")
    return units, np.array(rows, dtype=np.float64).reshape(n, dim)


def _epoch_python(W, C, b, bc, gW, gC, gb, gbc, rows, cols, logx, fx, order, lr):
    """One AdaGrad pass over the entries in ``order``; returns the summed loss."""
    total = 0.0
    dim = W.shape[1]
    for k in order:
        i = rows[k]
        j = cols[k]
        diff = b[i] + bc[j] - logx[k]
        for d in range(dim):
            diff += W[i, d] * C[j, d]
        total += fx[k] * diff * diff
        g = 2.0 * fx[k] * diff
        for d in range(dim):
            dw = g * C[j, d]
            dc = g * W[i, d]
            gW[i, d] += dw * dw
            gC[j, d] += dc * dc
            W[i, d] -= lr * dw / math.sqrt(gW[i, d])
            C[j, d] -= lr * dc / math.sqrt(gC[j, d])
        gg = g * g
        gb[i] += gg
        gbc[j] += gg
        b[i] -= lr * g / math.sqrt(gb[i])
        bc[j] -= lr * g / math.sqrt(gbc[j])
    return total


try:
    import numba

    _run_epoch = numba.njit(cache=True)(_epoch_python)
except ImportError:  # pragma: no cover
    _run_epoch = _epoch_python


def glove_train(
    table: CooccurrenceTable,
    units: Sequence[str] | None = None,
    dim: int = DEFAULT_DIM,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    x_max: float = DEFAULT_X_MAX,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> EmbeddingTable:
    """Minimize the weighted least-squares objective one entry at a time.

    Per-coordinate AdaGrad with accumulators starting at 1. The loss recorded
    for an epoch is the sum of per-entry losses seen during that pass.
    """
    if len(table) == 0:
        raise ValueError("co-occurrence table is empty")
    V = table.vocab_size
    units = list(units) if units is not None else [str(i) for i in range(V)]
    if len(units) != V:
        raise ValueError("units must match the table's vocabulary size")
    rng = np.random.default_rng(seed)
    scale = 0.5 / dim
    W = rng.uniform(-scale, scale, (V, dim))
    C = rng.uniform(-scale, scale, (V, dim))
    b = rng.uniform(-scale, scale, V)
    bc = rng.uniform(-scale, scale, V)
    gW, gC = np.ones_like(W), np.ones_like(C)
    gb, gbc = np.ones_like(b), np.ones_like(bc)

    rows, cols, vals = table.rows, table.cols, table.values
    logx = np.log(vals)
    fx = np.asarray(weighting_f(vals, x_max, alpha), dtype=np.float64).reshape(-1)
    history: list[float] = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(vals))
        total = _run_epoch(W, C, b, bc, gW, gC, gb, gbc, rows, cols, logx, fx, order, lr)
        if not math.isfinite(total):
            raise NumericalError(f"GloVe loss became non-finite at epoch {epoch}")
        history.append(float(total))
        log.debug("glove epoch %d loss %.6f", epoch, total)
    return EmbeddingTable(units, W, C, b, bc, history)


def glove_loss(emb: EmbeddingTable, table: CooccurrenceTable, x_max=DEFAULT_X_MAX, alpha=DEFAULT_ALPHA) -> float:
    r, c = table.rows, table.cols
    pred = np.einsum("ij,ij->i", emb.main[r], emb.context[c]) + emb.bias[r] + emb.context_bias[c]
    diff = pred - np.log(table.values)
    return float(np.sum(weighting_f(table.values, x_max, alpha) * diff * diff))


def train_embeddings(
    corpus: Sequence[UnitSequence | Sequence[str]],
    dim: int = DEFAULT_DIM,
    window: int = DEFAULT_WINDOW,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    x_max: float = DEFAULT_X_MAX,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    min_count: int = 1,
) -> EmbeddingTable:
    from .labeler import build_vocab

    vocab = build_vocab(corpus, min_count=min_count)
    table = build_cooccurrence(corpus, vocab, window)
    return glove_train(table, vocab.itos, dim, epochs, lr, x_max, alpha, seed)


def nearest_neighbors(table: EmbeddingTable, unit: str, k: int = 10) -> list[tuple[str, float]]:
    if unit not in table.index:
        raise KeyError(f"unit {unit!r} not in embedding table")
    vecs = table.vectors()
    norms = np.linalg.norm(vecs, axis=1)
    norms[norms == 0] = 1.0
    q = table.index[unit]
    sims = (vecs @ vecs[q]) / (norms * norms[q])
    order = sorted((i for i in range(len(vecs)) if i != q), key=lambda i: (-sims[i], i))
    return [(table.units[i], float(sims[i])) for i in order[:k]]


__all__ = [
    "UNK",
    "CooccurrenceTable",
    "EmbeddingTable",
    "build_cooccurrence",
    "entry_loss_and_grads",
    "glove_loss",
    "glove_train",
    "load_vectors",
    "nearest_neighbors",
    "save_vectors",
    "train_embeddings",
    "weighting_f",
]
