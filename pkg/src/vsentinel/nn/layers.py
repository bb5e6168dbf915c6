from __future__ import annotations

from typing import Iterator

import numpy as np

from ..tensor import Parameter, Tensor, get_default_dtype
from . import functional as F


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(get_default_dtype())


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(get_default_dtype())


class Module:
    """Base class: tracks child modules and parameters by attribute order."""

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True):
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3, stride: int = 1,
                 padding: str = "same", activation: str | None = "relu", rng=None, name: str = "conv"):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        if activation == "relu":
            w = he_uniform(rng, shape, fan_in)
        else:
            w = glorot_uniform(rng, shape, fan_in, out_channels * kernel_size * kernel_size)
        self.weight = Parameter(w, name=f"{name}.weight")
        self.bias = Parameter(np.zeros(out_channels), name=f"{name}.bias")
        self.stride = stride
        self.padding = padding
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        y = F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
        return y.relu() if self.activation == "relu" else y

    def __repr__(self):
        f, c, k, _ = self.weight.shape
        return f"Conv2d({c}->{f}, k={k}, {self.padding}, {self.activation})"


class MaxPool2d(Module):
    def __init__(self, window: int = 2, stride: int = 2):
        self.window = window
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return F.maxpool2d(x, self.window, self.stride)

    def __repr__(self):
        return f"MaxPool2d({self.window})"


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, activation: str | None = None, rng=None,
                 name: str = "dense"):
        rng = rng if rng is not None else np.random.default_rng(0)
        if activation == "relu":
            w = he_uniform(rng, (in_features, out_features), in_features)
        else:
            w = glorot_uniform(rng, (in_features, out_features), in_features, out_features)
        self.weight = Parameter(w, name=f"{name}.weight")
        self.bias = Parameter(np.zeros(out_features), name=f"{name}.bias")
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        y = F.linear(x, self.weight, self.bias)
        if self.activation == "relu":
            return y.relu()
        if self.activation == "sigmoid":
            return y.sigmoid()
        if self.activation == "softmax":
            return F.softmax(y)
        return y


class Dropout(Module):
    def __init__(self, rate: float, rng=None):
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout(x, self.rate, self.rng, training=self.training)


class Flatten(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x.flatten_from(1)


class Sequential(Module):
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]
