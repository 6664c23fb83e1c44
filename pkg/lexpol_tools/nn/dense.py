"""Feedforward networks with hand-written backpropagation.

Only the fixed topologies the agents need are supported: a chain of dense
layers, each followed by relu, tanh or nothing.  Inputs may be a single
vector ``(in,)`` or a batch ``(B, in)``; outputs have the matching rank.
"""

import dataclasses
import logging
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import NumericError, ShapeError, StateError

logger = logging.getLogger(__name__)

Activation = Literal["relu", "tanh", "identity"]
ACTIVATIONS: Tuple[str, ...] = ("relu", "tanh", "identity")


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(pre, 0.0)
    if activation == "tanh":
        return np.tanh(pre)
    return pre


def _activation_grad(pre: np.ndarray, out: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (pre > 0.0).astype(np.float64)
    if activation == "tanh":
        return 1.0 - out * out
    return np.ones_like(pre)


def softmax(v: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, max-subtracted."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0 or v.shape[-1] == 0:
        raise ShapeError("softmax of an empty vector")
    if not np.all(np.isfinite(v)):
        raise NumericError("softmax input contains non-finite values")
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient wrt the logits given dL/d(probs)."""
    return probs * (upstream - np.sum(probs * upstream, axis=-1, keepdims=True))


@dataclasses.dataclass
class GradTape:
    """Gradient buffers mirroring a DenseNet's parameters.

    ``input`` holds dL/dx from the most recent backward pass so callers can
    keep propagating into whatever produced x.
    """

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    input: Optional[np.ndarray] = None
    accumulate: bool = True

    @classmethod
    def like(cls, net: "DenseNet") -> "GradTape":
        return cls(
            weights=[np.zeros_like(w) for w in net.weights],
            biases=[np.zeros_like(b) for b in net.biases],
        )

    def arrays(self) -> List[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def zero(self) -> None:
        for a in self.arrays():
            a.fill(0.0)
        self.input = None

    def copy(self) -> "GradTape":
        return GradTape(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            input=None if self.input is None else self.input.copy(),
            accumulate=self.accumulate,
        )


class DenseNet:
    """A chain of dense layers.

    Args:
        weights: per layer, a matrix of shape (out, in)
        biases: per layer, a vector of shape (out,)
        activations: per layer, one of relu, tanh, identity
    """

    def __init__(
        self,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        activations: Sequence[str],
    ) -> None:
        if not (len(weights) == len(biases) == len(activations)) or not weights:
            raise ShapeError("weights, biases and activations must be non-empty and equally long")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in biases]
        self.activations = list(activations)
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if w.ndim != 2 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i} expects {w.shape[1]} inputs but layer {i - 1} has {self.weights[i - 1].shape[0]} outputs"
                )
            if act not in ACTIVATIONS:
                raise ShapeError(f"layer {i}: unknown activation {act!r}")
        self.tape = GradTape.like(self)
        self._inputs: Optional[List[np.ndarray]] = None
        self._pre: Optional[List[np.ndarray]] = None
        self._outputs: Optional[List[np.ndarray]] = None
        self._batched = False

    @classmethod
    def build(
        cls,
        sizes: Sequence[int],
        activations: Union[str, Sequence[str]],
        rng: np.random.Generator,
        final_scale: float = 1.0,
        final_activation: str = "identity",
    ) -> "DenseNet":
        """Initialize with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.

        ``activations`` names the hidden activation (or lists one per layer);
        the output layer uses ``final_activation`` and is scaled by
        ``final_scale``.
        """
        n_layers = len(sizes) - 1
        if n_layers < 1:
            raise ShapeError("a network needs at least an input and an output size")
        if isinstance(activations, str):
            activations = [activations] * (n_layers - 1) + [final_activation]
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b = rng.uniform(-bound, bound, size=fan_out)
            if i == n_layers - 1:
                w, b = w * final_scale, b * final_scale
            weights.append(w)
            biases.append(b)
        return cls(weights, biases, activations)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def dims(self) -> List[int]:
        return [self.in_dim] + [w.shape[0] for w in self.weights]

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays (w0, b0, w1, b1, ...), aligned with ``tape.arrays()``."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == 2
        if x.ndim not in (1, 2) or x.shape[-1] != self.in_dim:
            raise ShapeError(f"expected input of width {self.in_dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericError("network input contains non-finite values")
        h = x if batched else x[None, :]
        inputs, pres, outs = [], [], []
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(h)
            pre = h @ w.T + b
            h = _activate(pre, act)
            pres.append(pre)
            outs.append(h)
        if cache:
            self._inputs, self._pre, self._outputs = inputs, pres, outs
            self._batched = batched
        return h if batched else h[0]

    __call__ = forward

    def backward(self, upstream: np.ndarray, accumulate_params: bool = True) -> GradTape:
        """Backpropagate dL/d(output) through the cached forward pass.

        Parameter gradients are added to ``self.tape`` (unless
        ``accumulate_params`` is false, when only dL/dx is computed);
        ``tape.input`` is overwritten with dL/dx.
        """
        if self._inputs is None:
            raise StateError("backward called without a cached forward pass")
        g = np.asarray(upstream, dtype=np.float64)
        if not self._batched:
            g = g[None, :]
        if g.shape != self._outputs[-1].shape:
            raise ShapeError(f"upstream gradient {g.shape} does not match output {self._outputs[-1].shape}")
        for i in reversed(range(len(self.weights))):
            g = g * _activation_grad(self._pre[i], self._outputs[i], self.activations[i])
            if accumulate_params:
                self.tape.weights[i] += g.T @ self._inputs[i]
                self.tape.biases[i] += g.sum(axis=0)
            g = g @ self.weights[i]
        self.tape.input = g if self._batched else g[0]
        return self.tape

    def pre_activations(self) -> List[np.ndarray]:
        if self._pre is None:
            raise StateError("no cached forward pass")
        return self._pre

    def zero_grad(self) -> None:
        self.tape.zero()

    def copy(self) -> "DenseNet":
        return DenseNet(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def copy_from(self, other: "DenseNet") -> None:
        if other.dims != self.dims:
            raise ShapeError(f"cannot copy a {other.dims} network into a {self.dims} network")
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src

    def check_finite(self, name: str = "network") -> None:
        for i, p in enumerate(self.parameters()):
            if not np.all(np.isfinite(p)):
                raise NumericError(f"{name}: parameter array {i} contains non-finite values")

    def __repr__(self) -> str:
        return f"DenseNet(dims={self.dims}, activations={self.activations})"


def mlp(
    in_dim: int,
    hidden: Sequence[int],
    out_dim: int,
    rng: np.random.Generator,
    activation: str = "relu",
    final_scale: float = 1.0,
) -> DenseNet:
    return DenseNet.build([in_dim, *hidden, out_dim], activation, rng, final_scale=final_scale)
