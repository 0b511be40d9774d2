"""Layers with hand-derived backward passes.

Every op follows the same protocol: ``forward`` returns ``(out, cache)`` and
``backward(dout, cache)`` returns the input gradient(s), adding parameter
gradients into ``Parameter.grad``. Caches are per call, so one layer can be
applied to several inputs (shared weights) and back-propagated for each.
"""

from __future__ import annotations

import numpy as np

from .tensor import Parameter, ShapeError, default_dtype, uniform

KERNEL_EPS = 1e-10
NORM_EPS = 1e-12


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# --------------------------------------------------------------------------
# elementwise and reductions


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy, y):
    return dy * (1.0 - y * y)


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def softmax_forward(z):
    """Row-wise softmax over the last axis."""
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    return p, p


def softmax_backward(dp, p):
    return p * (dp - np.sum(dp * p, axis=-1, keepdims=True))


def max_pool_over_time_forward(h):
    if h.ndim != 2:
        raise ShapeError("max_pool_over_time", h.shape)
    idx = np.argmax(h, axis=0)
    return h[idx, np.arange(h.shape[1])], (idx, h.shape)


def max_pool_over_time_backward(dy, cache):
    idx, shape = cache
    dh = np.zeros(shape, dtype=dy.dtype)
    dh[idx, np.arange(shape[1])] = dy
    return dh


def k_max_pool_forward(x, k: int):
    """Keep the ``k`` largest entries of a 1-D array in their original order.

    Ties go to the earlier position. Shorter inputs are returned whole and
    zero-padded to length ``k``.
    """
    if x.ndim != 1:
        raise ShapeError("k_max_pool", x.shape)
    n = x.shape[0]
    if n <= k:
        idx = np.arange(n)
    else:
        idx = np.sort(np.argsort(-x, kind="stable")[:k])
    out = np.zeros(k, dtype=x.dtype)
    out[: len(idx)] = x[idx]
    return out, (idx, n)


def k_max_pool_backward(dy, cache):
    idx, n = cache
    dx = np.zeros(n, dtype=dy.dtype)
    dx[idx] = dy[: len(idx)]
    return dx


# --------------------------------------------------------------------------
# similarity ops


def l2_normalize_forward(x):
    """Normalize rows (last axis) to unit length; zero rows stay zero."""
    norm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    safe = np.maximum(norm, NORM_EPS)
    u = x / safe
    return u, (u, safe)


def l2_normalize_backward(du, cache):
    u, safe = cache
    return (du - u * np.sum(u * du, axis=-1, keepdims=True)) / safe


def dot_interaction_forward(a, b):
    """Cosine matrix between rows of ``a`` (n x k) and rows of ``b`` (m x k)."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError("dot_interaction", a.shape, b.shape)
    ua, ca = l2_normalize_forward(a)
    ub, cb = l2_normalize_forward(b)
    return ua @ ub.T, (ua, ub, ca, cb)


def dot_interaction_backward(dm, cache):
    ua, ub, ca, cb = cache
    dua = dm @ ub
    dub = dm.T @ ua
    return l2_normalize_backward(dua, ca), l2_normalize_backward(dub, cb)


def asym_cosine_forward(x, y, alpha: float):
    """x.y / (|x|^(2 alpha) |y|^(2 (1 - alpha))); defined as 0 if either is zero."""
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("asym_cosine", x.shape, y.shape)
    s = float(x @ y)
    nx = float(x @ x)
    ny = float(y @ y)
    if nx == 0.0 or ny == 0.0:
        return 0.0, None
    scale = nx ** (-alpha) * ny ** (alpha - 1.0)
    return s * scale, (x, y, s, nx, ny, scale, alpha)


def asym_cosine_backward(dout: float, cache):
    if cache is None:
        return None, None
    x, y, s, nx, ny, scale, alpha = cache
    dx = dout * scale * (y - (2.0 * alpha * s / nx) * x)
    dy = dout * scale * (x - (2.0 * (1.0 - alpha) * s / ny) * y)
    return dx, dy


def cosine_forward(x, y):
    return asym_cosine_forward(x, y, 0.5)


cosine_backward = asym_cosine_backward


def rbf_kernel_pool_forward(m, mus, sigma: float, eps: float = KERNEL_EPS):
    """phi_k = sum_i log(sum_j exp(-(m_ij - mu_k)^2 / (2 sigma^2)) + eps)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if m.ndim != 2:
        raise ShapeError("rbf_kernel_pool", m.shape)
    mus = np.asarray(mus, dtype=m.dtype)
    diff = m[:, :, None] - mus[None, None, :]  # n x m x K
    kern = np.exp(-(diff * diff) / (2.0 * sigma * sigma))
    row = kern.sum(axis=1) + eps  # n x K
    phi = np.log(row).sum(axis=0)
    return phi, (diff, kern, row, sigma)


def rbf_kernel_pool_backward(dphi, cache):
    diff, kern, row, sigma = cache
    # d phi_k / d m_ij = kern_ijk * (-(m_ij - mu_k) / sigma^2) / row_ik
    w = dphi[None, None, :] / row[:, None, :]
    return np.sum(w * kern * (-diff / (sigma * sigma)), axis=2)


# --------------------------------------------------------------------------
# parameterized layers


class Module:
    def named_parameters(self, prefix: str = ""):
        for name, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(prefix + name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bound: float | None = None):
        bound = 1.0 / np.sqrt(n_in) if bound is None else bound
        self.W = Parameter(uniform(rng, (n_in, n_out), bound))
        self.b = Parameter(np.zeros(n_out))

    def forward(self, x):
        if x.shape[-1] != self.W.shape[0]:
            raise ShapeError("linear", x.shape, self.W.shape)
        return x @ self.W.value + self.b.value, x

    def backward(self, dy, x):
        x2 = x.reshape(-1, x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.W.grad += x2.T @ dy2
        self.b.grad += dy2.sum(axis=0)
        return dy @ self.W.value.T


class Conv1d(Module):
    """Convolution over the unit axis of an (n x d) sequence, ``filters`` outputs.

    Inputs shorter than ``width`` are zero-padded at the end to one full window.
    """

    def __init__(self, dim: int, width: int, filters: int, rng: np.random.Generator):
        self.dim, self.width, self.filters = dim, width, filters
        bound = 1.0 / np.sqrt(dim * width)
        self.W = Parameter(uniform(rng, (width * dim, filters), bound))
        self.b = Parameter(np.zeros(filters))

    def _patches(self, x):
        n = x.shape[0]
        if n < self.width:
            x = np.vstack([x, np.zeros((self.width - n, self.dim), dtype=x.dtype)])
        n_out = x.shape[0] - self.width + 1
        cols = [x[k : k + n_out] for k in range(self.width)]
        return np.concatenate(cols, axis=1), n_out

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError("conv1d", x.shape, (None, self.dim))
        patches, n_out = self._patches(x)
        return patches @ self.W.value + self.b.value, (patches, n_out, x.shape[0])

    def backward(self, dy, cache):
        patches, n_out, n = cache
        self.W.grad += patches.T @ dy
        self.b.grad += dy.sum(axis=0)
        dp = dy @ self.W.value.T
        dx = np.zeros((max(n, self.width), self.dim), dtype=dy.dtype)
        for k in range(self.width):
            dx[k : k + n_out] += dp[:, k * self.dim : (k + 1) * self.dim]
        return dx[:n]


class LSTM(Module):
    """Single-direction LSTM over an (n x d) sequence; gate order i, f, g, o."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.dim, self.hidden = dim, hidden
        bound = 1.0 / np.sqrt(hidden)
        self.Wx = Parameter(uniform(rng, (dim, 4 * hidden), bound))
        self.Wh = Parameter(uniform(rng, (hidden, 4 * hidden), bound))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        self.b = Parameter(b)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError("lstm", x.shape, (None, self.dim))
        n, h = x.shape[0], self.hidden
        zx = x @ self.Wx.value + self.b.value
        Wh = self.Wh.value
        dt = zx.dtype
        H = np.zeros((n, h), dtype=dt)
        C = np.zeros((n, h), dtype=dt)
        G = np.zeros((n, 4 * h), dtype=dt)
        h_prev = np.zeros(h, dtype=dt)
        c_prev = np.zeros(h, dtype=dt)
        for t in range(n):
            z = zx[t] + h_prev @ Wh
            g = np.empty_like(z)
            g[: 2 * h] = _sigmoid(z[: 2 * h])
            g[2 * h : 3 * h] = np.tanh(z[2 * h : 3 * h])
            g[3 * h :] = _sigmoid(z[3 * h :])
            c_prev = g[h : 2 * h] * c_prev + g[:h] * g[2 * h : 3 * h]
            h_prev = g[3 * h :] * np.tanh(c_prev)
            G[t], C[t], H[t] = g, c_prev, h_prev
        return H, (x, H, C, G)

    def backward(self, dH, cache):
        x, H, C, G = cache
        n, h = H.shape
        Wh = self.Wh.value
        dZ = np.zeros_like(G)
        dh_next = np.zeros(h, dtype=dH.dtype)
        dc_next = np.zeros(h, dtype=dH.dtype)
        for t in range(n - 1, -1, -1):
            i, f, g, o = G[t, :h], G[t, h : 2 * h], G[t, 2 * h : 3 * h], G[t, 3 * h :]
            tc = np.tanh(C[t])
            c_prev = C[t - 1] if t > 0 else 0.0
            dh = dH[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = dZ[t]
            dz[:h] = dc * g * i * (1.0 - i)
            dz[h : 2 * h] = dc * c_prev * f * (1.0 - f)
            dz[2 * h : 3 * h] = dc * i * (1.0 - g * g)
            dz[3 * h :] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = Wh @ dz
        if n > 1:
            self.Wh.grad += H[:-1].T @ dZ[1:]
        self.Wx.grad += x.T @ dZ
        self.b.grad += dZ.sum(axis=0)
        return dZ @ self.Wx.value.T


class BiLSTM(Module):
    """Forward and backward LSTMs, outputs concatenated to (n x 2 hidden)."""

    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.fwd = LSTM(dim, hidden, rng)
        self.bwd = LSTM(dim, hidden, rng)
        self.hidden = hidden

    def forward(self, x):
        hf, cf = self.fwd.forward(x)
        hb, cb = self.bwd.forward(x[::-1])
        return np.concatenate([hf, hb[::-1]], axis=1), (cf, cb)

    def backward(self, dH, cache):
        cf, cb = cache
        h = self.hidden
        dx = self.fwd.backward(dH[:, :h], cf)
        dx += self.bwd.backward(np.ascontiguousarray(dH[::-1, h:]), cb)[::-1]
        return dx


class SelfAttention(Module):
    """Structured self-attention: A = softmax_rows(W2 tanh(W1 H^T)), M = A H.

    ``penalty`` scales the redundancy term |A A^T - I|_F^2, reported by
    :meth:`penalty_value` and included in :meth:`backward`.
    """

    def __init__(self, dim: int, d_a: int, r: int, rng: np.random.Generator, penalty: float = 0.0):
        self.W1 = Parameter(uniform(rng, (d_a, dim), 1.0 / np.sqrt(dim)))
        self.W2 = Parameter(uniform(rng, (r, d_a), 1.0 / np.sqrt(d_a)))
        self.penalty = penalty

    def forward(self, H):
        if H.ndim != 2 or H.shape[1] != self.W1.shape[1]:
            raise ShapeError("self_attention", H.shape, self.W1.shape)
        S = np.tanh(self.W1.value @ H.T)  # d_a x n
        A, _ = softmax_forward(self.W2.value @ S)  # r x n
        M = A @ H
        return (M, A), (H, S, A)

    @staticmethod
    def penalty_term(A) -> float:
        G = A @ A.T - np.eye(A.shape[0], dtype=A.dtype)
        return float(np.sum(G * G))

    def backward(self, dM, cache, dA_extra=None):
        H, S, A = cache
        dA = dM @ H.T
        if dA_extra is not None:
            dA = dA + dA_extra
        if self.penalty:
            G = A @ A.T - np.eye(A.shape[0], dtype=A.dtype)
            dA = dA + self.penalty * 4.0 * (G @ A)
        dH = A.T @ dM
        dZ = softmax_backward(dA, A)  # r x n
        self.W2.grad += dZ @ S.T
        dS = self.W2.value.T @ dZ
        dU = dS * (1.0 - S * S)  # d_a x n
        self.W1.grad += dU @ H
        dH += dU.T @ self.W1.value
        return dH


def as_array(x):
    return np.asarray(x, dtype=default_dtype())
