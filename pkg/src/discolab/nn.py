"""Parameter containers shared by the classifier and the purifier."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator, dtype=np.float32, a: float = 0.0) -> Tensor:
    """Fan-in Kaiming-uniform; ``a`` is the leaky-ReLU slope (a=sqrt(5) gives bound 1/sqrt(fan_in))."""
    bound = np.sqrt(6.0 / ((1.0 + a * a) * fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def zeros_param(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


class ParamModel:
    """Ordered named parameters; subclasses fill ``self.params`` in declaration order."""

    architecture = "base"

    def __init__(self):
        self.params: dict[str, Tensor] = {}

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def astype(self, dtype):
        """Cast parameters in place (e.g. to float64 for gradient checks)."""
        for p in self.params.values():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def state_arrays(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params.values()]
