"""The five pair-scoring models.

Every model splits into a per-article ``encode`` and a pairwise ``head`` so
the current article is encoded once and scored against all its candidates.
"""

from __future__ import annotations

import logging

import numpy as np

from .. import nn
from ..nn.layers import (
    Module,
    asym_cosine_backward,
    asym_cosine_forward,
    dot_interaction_backward,
    dot_interaction_forward,
    k_max_pool_backward,
    k_max_pool_forward,
    l2_normalize_backward,
    l2_normalize_forward,
    max_pool_over_time_backward,
    max_pool_over_time_forward,
    rbf_kernel_pool_backward,
    rbf_kernel_pool_forward,
    tanh_backward,
    tanh_forward,
)
from ..nn.tensor import Parameter
from .config import RankerConfig

log = logging.getLogger(__name__)


class PairRanker(Module):
    name = "base"

    def __init__(self, config: RankerConfig, embeddings: np.ndarray):
        self.config = config
        self.emb = Parameter(embeddings, trainable=config.fine_tune)
        self.dim = self.emb.shape[1]
        self.warnings: list[str] = []

    # subclasses implement these four
    def encode(self, x):
        raise NotImplementedError

    def encode_backward(self, drep, cache):
        raise NotImplementedError

    def head(self, rep_c, rep_r):
        raise NotImplementedError

    def head_backward(self, ds, cache):
        raise NotImplementedError

    def extra_loss(self, cache) -> float:
        return 0.0

    # ------------------------------------------------------------------
    def embed(self, ids) -> np.ndarray:
        return self.emb.value[np.asarray(ids, dtype=np.int64)]

    def embed_backward(self, ids, dx) -> None:
        if self.emb.trainable and dx is not None:
            np.add.at(self.emb.grad, np.asarray(ids, dtype=np.int64), dx)

    def encode_ids(self, ids):
        if len(ids) == 0:
            return None, None
        return self.encode(self.embed(ids))

    def score_reps(self, rep_c, rep_r, ac="?", ar="?"):
        if rep_c is None or rep_r is None:
            self.warnings.append(f"empty article in pair ({ac}, {ar}); scored 0")
            return 0.0, None
        return self.head(rep_c, rep_r)

    def score(self, ids_c, ids_r) -> float:
        rc, _ = self.encode_ids(ids_c)
        rr, _ = self.encode_ids(ids_r)
        s, _ = self.score_reps(rc, rr)
        return float(s)

    def instance_scores(self, ids_c, ids_pos, negs) -> tuple[float, list[float]]:
        rc, _ = self.encode_ids(ids_c)
        reps = [self.encode_ids(ids)[0] for ids in [ids_pos, *negs]]
        scores = [float(self.score_reps(rc, r)[0]) for r in reps]
        return scores[0], scores[1:]

    # ------------------------------------------------------------------
    def named_parameters(self, prefix: str = ""):
        for name, p in super().named_parameters(prefix):
            if name == prefix + "emb" and not p.trainable:
                continue
            yield name, p

    def state_dict(self) -> dict[str, np.ndarray]:
        d = {name: p.value.copy() for name, p in self.named_parameters()}
        d["emb"] = self.emb.value.copy()
        return d

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        mine = dict(self.named_parameters())
        mine["emb"] = self.emb
        missing = set(mine) - set(state)
        if missing:
            raise KeyError(f"checkpoint is missing parameter(s): {', '.join(sorted(missing))}")
        for name, p in mine.items():
            if tuple(state[name].shape) != p.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p.value[...] = state[name]


class TextCNN(PairRanker):
    name = "textcnn"

    def __init__(self, config, embeddings, rng):
        super().__init__(config, embeddings)
        self.convs = [nn.Conv1d(self.dim, w, config.filters, rng) for w in config.textcnn_widths]

    def encode(self, x):
        parts, caches = [], []
        for conv in self.convs:
            h, cc = conv.forward(x)
            p, cp = max_pool_over_time_forward(h)
            parts.append(p)
            caches.append((cc, cp))
        return np.concatenate(parts), caches

    def encode_backward(self, drep, caches):
        F = self.config.filters
        dx = None
        for k, (conv, (cc, cp)) in enumerate(zip(self.convs, caches)):
            dh = max_pool_over_time_backward(drep[k * F : (k + 1) * F], cp)
            d = conv.backward(dh, cc)
            dx = d if dx is None else dx + d
        return dx

    def head(self, rep_c, rep_r):
        return asym_cosine_forward(rep_c, rep_r, self.config.alpha)

    def head_backward(self, ds, cache):
        return asym_cosine_backward(ds, cache)


class CDSSM(PairRanker):
    name = "cdssm"

    def __init__(self, config, embeddings, rng):
        super().__init__(config, embeddings)
        self.conv = nn.Conv1d(self.dim, config.cdssm_width, config.filters, rng)
        self.proj = nn.Linear(config.filters, config.mlp_out, rng)

    def encode(self, x):
        h, cc = self.conv.forward(x)
        p, cp = max_pool_over_time_forward(h)
        z, cl = self.proj.forward(p)
        y, ct = tanh_forward(z)
        return y, (cc, cp, cl, ct)

    def encode_backward(self, drep, cache):
        cc, cp, cl, ct = cache
        dz = tanh_backward(drep, ct)
        dp = self.proj.backward(dz, cl)
        dh = max_pool_over_time_backward(dp, cp)
        return self.conv.backward(dh, cc)

    def head(self, rep_c, rep_r):
        return asym_cosine_forward(rep_c, rep_r, 0.5)

    def head_backward(self, ds, cache):
        return asym_cosine_backward(ds, cache)


class MLP(Module):
    """Linear layers with tanh between them; the last layer is linear."""

    def __init__(self, n_in: int, dims, rng):
        self.layers = []
        for d in dims:
            self.layers.append(nn.Linear(n_in, d, rng))
            n_in = d

    def forward(self, x):
        caches = []
        for k, layer in enumerate(self.layers):
            x, cl = layer.forward(x)
            ct = None
            if k < len(self.layers) - 1:
                x, ct = tanh_forward(x)
            caches.append((cl, ct))
        return x, caches

    def backward(self, dy, caches):
        for layer, (cl, ct) in zip(reversed(self.layers), reversed(caches)):
            if ct is not None:
                dy = tanh_backward(dy, ct)
            dy = layer.backward(dy, cl)
        return dy


class MVLSTM(PairRanker):
    name = "mvlstm"

    def __init__(self, config, embeddings, rng):
        super().__init__(config, embeddings)
        self.lstm = nn.BiLSTM(self.dim, config.hidden, rng)
        self.mlp = MLP(config.topk, config.mlp_dims, rng)

    def encode(self, x):
        return self.lstm.forward(x)

    def encode_backward(self, drep, cache):
        return self.lstm.backward(drep, cache)

    def head(self, hc, hr):
        m, cm = dot_interaction_forward(hc, hr)
        flat = m.reshape(-1)
        top, ck = k_max_pool_forward(flat, self.config.topk)
        out, cmlp = self.mlp.forward(top)
        return float(out[0]), (cm, m.shape, ck, cmlp)

    def head_backward(self, ds, cache):
        cm, shape, ck, cmlp = cache
        dtop = self.mlp.backward(np.array([ds]), cmlp)
        dflat = k_max_pool_backward(dtop, ck)
        return dot_interaction_backward(dflat.reshape(shape), cm)


def knrm_mus(kernels: int) -> np.ndarray:
    """Kernel centres evenly spaced over [-1, 1]; the last one is the exact-match kernel at 1."""
    if kernels == 1:
        return np.array([1.0])
    return np.linspace(-1.0, 1.0, kernels)


class KNRM(PairRanker):
    name = "knrm"

    def __init__(self, config, embeddings, rng):
        super().__init__(config, embeddings)
        self.mus = knrm_mus(config.kernels)
        self.rank = nn.Linear(config.kernels, 1, rng, bound=1e-3)

    def encode(self, x):
        return l2_normalize_forward(x)

    def encode_backward(self, drep, cache):
        return l2_normalize_backward(drep, cache)

    def features(self, uc, ur):
        m = uc @ ur.T
        phi, ck = rbf_kernel_pool_forward(m, self.mus, self.config.sigma)
        return m, phi, ck

    def head(self, uc, ur):
        m, phi, ck = self.features(uc, ur)
        scale = self.config.knrm_feature_scale
        z, cl = self.rank.forward(phi * scale)
        s, ct = tanh_forward(z)
        return float(s[0]), (uc, ur, ck, cl, ct, scale)

    def head_backward(self, ds, cache):
        uc, ur, ck, cl, ct, scale = cache
        dz = tanh_backward(np.array([ds]), ct)
        dphi = self.rank.backward(dz, cl) * scale
        dm = rbf_kernel_pool_backward(dphi, ck)
        return dm @ ur, dm.T @ uc


class BiLSTMSA(PairRanker):
    name = "bilstm_sa"

    def __init__(self, config, embeddings, rng):
        super().__init__(config, embeddings)
        self.lstm = nn.BiLSTM(self.dim, config.hidden, rng)
        self.attn = nn.SelfAttention(2 * config.hidden, config.d_a, config.r, rng, penalty=config.penalty)

    def encode(self, x):
        h, cl = self.lstm.forward(x)
        (m, a), ca = self.attn.forward(h)
        return m.reshape(-1), (cl, ca, m.shape, a)

    def encode_backward(self, drep, cache, penalty_weight: float = 1.0):
        cl, ca, shape, _ = cache
        saved = self.attn.penalty
        self.attn.penalty = saved * penalty_weight
        try:
            dh = self.attn.backward(drep.reshape(shape), ca)
        finally:
            self.attn.penalty = saved
        return self.lstm.backward(dh, cl)

    def extra_loss(self, cache) -> float:
        if not self.attn.penalty:
            return 0.0
        return self.attn.penalty * nn.SelfAttention.penalty_term(cache[3])

    def attention(self, ids) -> np.ndarray:
        _, cache = self.encode_ids(ids)
        if cache is None:
            raise ValueError("cannot compute attention for an empty article")
        return cache[3]

    def head(self, rep_c, rep_r):
        return asym_cosine_forward(rep_c, rep_r, 0.5)

    def head_backward(self, ds, cache):
        return asym_cosine_backward(ds, cache)

    def score_with_attention(self, ids_c, ids_r):
        rc, cc = self.encode_ids(ids_c)
        rr, cr = self.encode_ids(ids_r)
        s, _ = self.score_reps(rc, rr)
        return float(s), cc[3] if cc else None, cr[3] if cr else None


MODEL_CLASSES = {cls.name: cls for cls in (TextCNN, CDSSM, MVLSTM, KNRM, BiLSTMSA)}


def build_model(config: RankerConfig, embeddings: np.ndarray) -> PairRanker:
    rng = np.random.default_rng(config.seed)
    return MODEL_CLASSES[config.model](config, np.asarray(embeddings, dtype=nn.default_dtype()), rng)
