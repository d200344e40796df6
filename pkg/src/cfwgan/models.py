"""Multi-layer perceptrons used as generator, critic and multi-label classifier."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamSet, ShapeError, Tensor

OUTPUT_ACTIVATIONS = ("sigmoid", "identity")


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes ``(input, hidden..., output)``; hidden layers use ReLU."""

    sizes: tuple[int, ...]
    output: str = "sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.sizes) < 2 or any(s <= 0 for s in self.sizes):
            raise ValueError(f"invalid layer sizes {self.sizes}")
        if self.output not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output!r}")

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]


def layer_names(i: int) -> tuple[str, str]:
    return f"l{i:02d}.W", f"l{i:02d}.b"


def init_params(spec: MlpSpec, seed) -> ParamSet:
    """Uniform fan-based weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = ParamSet()
    for i, (fan_in, fan_out) in enumerate(zip(spec.sizes[:-1], spec.sizes[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w, b = layer_names(i)
        params[w] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[b] = np.zeros(fan_out)
    return params


def check_params(spec: MlpSpec, params: Mapping[str, np.ndarray]) -> None:
    for i, (fan_in, fan_out) in enumerate(zip(spec.sizes[:-1], spec.sizes[1:])):
        w, b = layer_names(i)
        if w not in params or b not in params:
            raise KeyError(f"missing parameters for layer {i}")
        if np.shape(params[w]) != (fan_in, fan_out) or np.shape(params[b]) != (fan_out,):
            raise ShapeError(
                f"layer {i}: expected {(fan_in, fan_out)}/{(fan_out,)}, "
                f"got {np.shape(params[w])}/{np.shape(params[b])}"
            )


def mlp_forward(
    spec: MlpSpec,
    params: Mapping[str, Tensor],
    x: Tensor,
    dropout=None,
) -> Tensor:
    """Forward pass.

    ``dropout``, if given, is called on every hidden activation and returns
    the (possibly masked) activation.
    """
    if x.ndim != 2 or x.shape[1] != spec.n_in:
        raise ShapeError(f"mlp input shape {x.shape} does not match width {spec.n_in}")
    h = x
    for i in range(spec.n_layers):
        w, b = layer_names(i)
        h = ad.affine(h, params[w], params[b])
        if i < spec.n_layers - 1:
            h = ad.relu(h)
            if dropout is not None:
                h = dropout(h)
    if spec.output == "sigmoid":
        h = ad.sigmoid(h)
    return h


def generator_spec(n_items: int, hidden: int, layers: int = 1) -> MlpSpec:
    return MlpSpec((n_items,) + (hidden,) * layers + (n_items,), output="sigmoid")


def discriminator_spec(n_items: int, hidden: int, layers: int = 1) -> MlpSpec:
    return MlpSpec((2 * n_items,) + (hidden,) * layers + (1,), output="identity")


def generator_forward(spec: MlpSpec, params: Mapping[str, Tensor], condition) -> Tensor:
    """Predicted interaction vectors, strictly inside (0, 1)."""
    condition = ad.as_tensor(condition)
    if spec.n_in != spec.n_out:
        raise ShapeError("generator must map item vectors to item vectors")
    return mlp_forward(spec, params, condition)


def discriminator_forward(
    spec: MlpSpec, params: Mapping[str, Tensor], vector, condition
) -> Tensor:
    """Critic score per row for ``[condition, vector]`` (condition first)."""
    vector, condition = ad.as_tensor(vector), ad.as_tensor(condition)
    if vector.shape != condition.shape:
        raise ShapeError(f"critic inputs differ: vector {vector.shape} vs condition {condition.shape}")
    return mlp_forward(spec, params, ad.concat([condition, vector]))


def predict(spec: MlpSpec, params: Mapping[str, np.ndarray], x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Inference-only forward over numpy arrays, in row batches."""
    out = []
    with ad.no_grad():
        tensors = {k: Tensor(v) for k, v in params.items()}
        for start in range(0, x.shape[0], batch_size):
            out.append(mlp_forward(spec, tensors, Tensor(x[start : start + batch_size])).value)
    if not out:
        return np.zeros((0, spec.n_out))
    out = np.vstack(out)
    if not np.isfinite(out).all():
        raise ad.NonFiniteError("mlp forward produced non-finite values")
    return out


@dataclass
class Network:
    """An :class:`MlpSpec` together with its parameter arrays."""

    spec: MlpSpec
    params: ParamSet

    @classmethod
    def init(cls, spec: MlpSpec, seed) -> Network:
        return cls(spec, init_params(spec, seed))

    def tensors(self, requires_grad: bool = True) -> dict[str, Tensor]:
        return self.params.tensors(requires_grad)

    def predict(self, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
        return predict(self.spec, self.params, x, batch_size)

    def copy(self) -> Network:
        return Network(self.spec, self.params.copy())
