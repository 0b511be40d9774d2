"""Parameter container and dtype policy.

Tensors are plain ``numpy.ndarray`` values. Everything runs in float64 unless
``set_default_dtype(np.float32)`` is called; gradient checks need float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError

_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    global _DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _DTYPE = dtype


def default_dtype():
    return _DTYPE


class ShapeError(ValueError):
    def __init__(self, op: str, *shapes):
        desc = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {desc}")
        self.op = op


class Parameter:
    """A trainable array, its gradient accumulator and per-coordinate optimizer state."""

    __slots__ = ("value", "grad", "state", "trainable")

    def __init__(self, value, trainable: bool = True):
        self.value = np.asarray(value, dtype=_DTYPE).copy()
        self.grad = np.zeros_like(self.value)
        self.state: dict[str, np.ndarray] = {}
        self.trainable = trainable

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape})"


def check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values in {what}")


def uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, shape).astype(_DTYPE)
