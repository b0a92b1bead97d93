from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from .autograd import Var


class Parameter(Var):
    """A trainable leaf of the tape with a persistent gradient slot."""

    __slots__ = ()

    def __init__(self, value, name: str, requires_grad: bool = True):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=requires_grad, name=name)
        self.grad = np.zeros_like(self.value)

    def accumulate(self, g: np.ndarray) -> None:
        self.grad += g


class ParameterStore:
    """Ordered, named collection of every trainable tensor in a model."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value, requires_grad: bool = True) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        p = Parameter(value, name, requires_grad=requires_grad)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def trainable(self) -> list[Parameter]:
        return [p for p in self._params.values() if p.requires_grad]

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def num_values(self) -> int:
        return sum(p.value.size for p in self.trainable())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, value in state.items():
            p = self._params[name]
            if p.value.shape != np.shape(value):
                raise ValueError(f"shape mismatch for {name}: {p.value.shape} vs {np.shape(value)}")
            p.value[...] = value

    def grads(self) -> dict[str, np.ndarray]:
        return {p.name: p.grad for p in self.trainable()}
