"""Per-epoch attention traces and their HTML heatmap rendering."""

from __future__ import annotations

import html
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_TOL = 1e-6


class TraceError(ValueError):
    pass


@dataclass
class AttentionTrace:
    article_id: str
    level: str
    units: list[str]
    epochs: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "article_id": self.article_id,
            "level": self.level,
            "units": list(self.units),
            "epochs": [{"epoch": e, "A": a.tolist()} for e, a in self.epochs],
        }

    @classmethod
    def from_json(cls, d: dict) -> "AttentionTrace":
        tr = cls(d["article_id"], d["level"], list(d["units"]))
        for rec in d["epochs"]:
            record_attention(tr, int(rec["epoch"]), np.asarray(rec["A"], dtype=np.float64))
        return tr

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AttentionTrace":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def record_attention(trace: AttentionTrace, epoch: int, A) -> AttentionTrace:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != len(trace.units):
        raise TraceError(f"attention shape {A.shape} does not match {len(trace.units)} units")
    if trace.epochs and epoch <= trace.epochs[-1][0]:
        raise TraceError(f"epoch {epoch} is not after epoch {trace.epochs[-1][0]}")
    sums = A.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > ROW_TOL) or np.any(A < 0):
        raise TraceError("attention rows must be non-negative and sum to 1")
    trace.epochs.append((epoch, A.copy()))
    return trace


def aggregate(A) -> np.ndarray:
    """Column sums over the attention rows, scaled so the strongest unit is exactly 1."""
    col = np.asarray(A, dtype=np.float64).sum(axis=0)
    return col / col.max()


def attention_entropy(A) -> float:
    col = np.asarray(A, dtype=np.float64).sum(axis=0)
    p = col / col.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


_STYLE = (
    "body{font-family:sans-serif;max-width:60em;margin:2em auto;line-height:2.1}"
    "section{margin-bottom:2em;border-top:1px solid #ccc}"
    ".u{padding:2px 3px;margin:1px;border-radius:3px}"
    ".p{border:1px solid #a33;}"
)


def _unit_html(unit: str, level: str, intensity: float) -> str:
    cls = "u p" if level == "phrase" and "_" in unit else "u"
    # repr keeps full precision so opacities 0 and 1 are exact
    return f'<span class="{cls}" style="background-color:rgba(220,30,30,{intensity!r})">{html.escape(unit)}</span>'


def emit_heatmap(trace: AttentionTrace, title: str | None = None) -> str:
    if not trace.epochs:
        raise TraceError("trace has no recorded epochs")
    title = title or f"Attention for {trace.article_id} ({trace.level})"
    parts = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8">',
        f"<title>{html.escape(title)}</title><style>{_STYLE}</style></head><body>",
        f"<h1>{html.escape(title)}</h1>",
    ]
    for epoch, A in trace.epochs:
        inten = aggregate(A)
        parts.append(
            f'<section class="epoch" data-epoch="{epoch}"><h2>Epoch {epoch}</h2>'
            f"<p>entropy {attention_entropy(A):.4f}</p><p>"
        )
        parts.append(" ".join(_unit_html(u, trace.level, float(x)) for u, x in zip(trace.units, inten)))
        parts.append("</p></section>")
    parts.append("</body></html>")
    return "\n".join(parts)


def mean_entropy(traces: Sequence[AttentionTrace], position: int) -> float:
    vals = [attention_entropy(t.epochs[position][1]) for t in traces]
    return sum(vals) / len(vals) if vals else math.nan
