"""Adam and AdaGrad over lists of :class:`Parameter`."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter


class Optimizer:
    def __init__(self, params, lr: float):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params: list[Parameter] = [p for p in params if p.trainable]
        self.lr = lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p in self.params:
            st = p.state
            if "m" not in st:
                st["m"] = np.zeros_like(p.value)
                st["v"] = np.zeros_like(p.value)
            m, v, g = st["m"], st["v"], p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class Adagrad(Optimizer):
    def __init__(self, params, lr: float = 0.05, eps: float = 1e-10, initial: float = 0.0):
        super().__init__(params, lr)
        self.eps, self.initial = eps, initial

    def step(self) -> None:
        for p in self.params:
            acc = p.state.get("sum")
            if acc is None:
                acc = p.state["sum"] = np.full_like(p.value, self.initial)
            acc += p.grad * p.grad
            p.value -= self.lr * p.grad / (np.sqrt(acc) + self.eps)


def make_optimizer(name: str, params, lr: float) -> Optimizer:
    name = name.lower()
    if name == "adam":
        return Adam(params, lr)
    if name == "adagrad":
        return Adagrad(params, lr)
    raise ValueError(f"unknown optimizer {name!r}")
