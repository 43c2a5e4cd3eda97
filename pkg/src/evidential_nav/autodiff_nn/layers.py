"""
Dense layers, nonlinearities and MLPs with hand-written reverse-mode gradients.

Layers operate on batches (rows are samples) in float64. `forward` records the
intermediate values needed by `backward` unless called with `record=False`,
which is how frozen networks are evaluated from several threads at once.
`backward` accumulates parameter gradients into `Tensor.grad` and returns the
gradient with respect to the layer input.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, field_validator

from evidential_nav.utils.errors import DomainError


class Tensor:
    """A named parameter array with its accumulated gradient."""

    def __init__(self, values, name: str):
        self.values = np.array(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(name={self.name!r}, shape={self.values.shape})"


class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"


class MlpConfig(BaseModel):
    """Layer widths include the input and output widths: [in, hidden..., out]."""

    layer_widths: list[int] = Field(..., min_length=3)
    activation: Activation = Activation.TANH
    seed: int = 0

    @field_validator("layer_widths")
    @classmethod
    def _positive_widths(cls, widths):
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be >= 1, got {widths}")
        return widths


class Layer:
    def forward(self, x: np.ndarray, record: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        return []

    def __call__(self, x, record: bool = True):
        return self.forward(x, record=record)


class Dense(Layer):
    """y = x W + b with symmetric uniform fan-in initialization."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, name: str, zero_init: bool = False):
        bound = 1.0 / np.sqrt(in_features)
        if zero_init:
            weight = np.zeros((in_features, out_features))
        else:
            weight = rng.uniform(-bound, bound, size=(in_features, out_features))
        self.weight = Tensor(weight, f"{name}.weight")
        self.bias = Tensor(np.zeros(out_features), f"{name}.bias")
        self._input = None

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.shape[1]

    def forward(self, x, record=True):
        if record:
            self._input = x
        return x @ self.weight.values + self.bias.values

    def backward(self, grad_output):
        self.weight.grad += self._input.T @ grad_output
        self.bias.grad += grad_output.sum(axis=0)
        return grad_output @ self.weight.values.T

    def parameters(self):
        return [self.weight, self.bias]


class Tanh(Layer):
    def __init__(self):
        self._output = None

    def forward(self, x, record=True):
        out = np.tanh(x)
        if record:
            self._output = out
        return out

    def backward(self, grad_output):
        return grad_output * (1.0 - self._output ** 2)


class Relu(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, record=True):
        mask = x > 0
        if record:
            self._mask = mask
        return x * mask

    def backward(self, grad_output):
        return grad_output * self._mask


class Sigmoid(Layer):
    def __init__(self):
        self._output = None

    def forward(self, x, record=True):
        out = 0.5 * (1.0 + np.tanh(0.5 * x))
        if record:
            self._output = out
        return out

    def backward(self, grad_output):
        return grad_output * self._output * (1.0 - self._output)


class Softmax(Layer):
    """Row-wise softmax head."""

    def __init__(self):
        self._output = None

    def forward(self, x, record=True):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=-1, keepdims=True)
        if record:
            self._output = out
        return out

    def backward(self, grad_output):
        s = self._output
        return s * (grad_output - np.sum(grad_output * s, axis=-1, keepdims=True))


_ACTIVATIONS = {Activation.TANH: Tanh, Activation.RELU: Relu}
_HEADS = {"softmax": Softmax, "sigmoid": Sigmoid, "tanh": Tanh}


class Mlp(Layer):
    """Dense layers with a hidden nonlinearity and an optional output head."""

    def __init__(self, config: MlpConfig, name: str, head: str | None = None,
                 rng: np.random.Generator | None = None, zero_last: bool = False):
        self.config = config
        self.name = name
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        widths = config.layer_widths
        self.layers: list[Layer] = []
        n_dense = len(widths) - 1
        for i, (w_in, w_out) in enumerate(zip(widths[:-1], widths[1:])):
            last = i == n_dense - 1
            self.layers.append(Dense(w_in, w_out, rng, f"{name}.{i}", zero_init=last and zero_last))
            if not last:
                self.layers.append(_ACTIVATIONS[config.activation]())
        if head is not None:
            self.layers.append(_HEADS[head]())

    @property
    def in_features(self) -> int:
        return self.config.layer_widths[0]

    @property
    def out_features(self) -> int:
        return self.config.layer_widths[-1]

    def forward(self, x, record=True):
        for layer in self.layers:
            x = layer.forward(x, record=record)
        return x

    def backward(self, grad_output):
        for layer in reversed(self.layers):
            grad_output = layer.backward(grad_output)
        return grad_output

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


def mlp_forward(mlp: Layer, inputs: np.ndarray, record: bool = False) -> np.ndarray:
    """Evaluate `mlp` on a single input vector or a batch of row vectors."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    expected = getattr(mlp, "in_features", batch.shape[-1])
    if batch.shape[-1] != expected:
        raise DomainError(f"Input width {batch.shape[-1]} does not match first layer width {expected}")
    out = mlp.forward(batch, record=record)
    return out[0] if single else out
