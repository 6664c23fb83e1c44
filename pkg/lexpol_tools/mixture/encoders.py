import dataclasses
from typing import Dict, Optional, Sequence

import numpy as np

from ..context import ContextEncoder
from ..nn import DenseNet, mlp
from ..utils.errors import ShapeError
from .gating import GateWeights, gate, gate_backward


@dataclasses.dataclass
class EncoderMixtureOutput:
    state: np.ndarray
    encoded: np.ndarray
    weights: GateWeights


class EncoderMixture:
    """k_enc state encoders blended by their own context gate.

    Args:
        encoders: raw state -> d_repr networks
        gate_net: context -> k_enc logits
        context: the mixture's context encoder (may be shared with the
            policy gate when neither head is trainable)
    """

    def __init__(self, encoders: Sequence[DenseNet], gate_net: DenseNet, context: ContextEncoder) -> None:
        if not encoders:
            raise ShapeError("an encoder mixture needs at least one encoder")
        dims = {(e.in_dim, e.out_dim) for e in encoders}
        if len(dims) != 1:
            raise ShapeError(f"encoders disagree on input/output dims: {sorted(dims)}")
        if gate_net.out_dim != len(encoders):
            raise ShapeError(f"encoder gate has {gate_net.out_dim} outputs for {len(encoders)} encoders")
        if gate_net.in_dim != context.n:
            raise ShapeError(f"encoder gate expects {gate_net.in_dim} inputs, context gives {context.n}")
        self.encoders = list(encoders)
        self.gate_net = gate_net
        self.context = context
        self._last_z: Optional[np.ndarray] = None

    @classmethod
    def build(
        cls,
        k_enc: int,
        state_dim: int,
        repr_dim: int,
        hidden: Sequence[int],
        gate_hidden: Sequence[int],
        context: ContextEncoder,
        encoder_rng: np.random.Generator,
        gate_rng: np.random.Generator,
    ) -> "EncoderMixture":
        encoders = [mlp(state_dim, hidden, repr_dim, encoder_rng) for _ in range(k_enc)]
        return cls(encoders, mlp(context.n, gate_hidden, k_enc, gate_rng), context)

    @property
    def k_enc(self) -> int:
        return len(self.encoders)

    @property
    def repr_dim(self) -> int:
        return self.encoders[0].out_dim

    def forward(self, s_raw: np.ndarray, z: np.ndarray, cache: bool = True) -> EncoderMixtureOutput:
        """Batched s_repr = sum_j beta_j E_j(s_raw)."""
        encoded = np.stack([e.forward(s_raw, cache=cache) for e in self.encoders], axis=-2)
        weights = gate(self.gate_net, z, cache=cache)
        state = np.einsum("...k,...kd->...d", weights.alpha, encoded)
        return EncoderMixtureOutput(state, encoded, weights)

    def backward(self, out: EncoderMixtureOutput, d_state: np.ndarray, train_encoders: bool = True) -> None:
        beta = out.weights.alpha
        if train_encoders:
            for j, e in enumerate(self.encoders):
                e.backward(beta[..., j, None] * d_state)
        d_beta = np.einsum("...kd,...d->...k", out.encoded, d_state)
        dz = gate_backward(self.gate_net, out.weights, d_beta)
        self.context.backward(dz)

    def networks(self) -> Dict[str, DenseNet]:
        nets = {f"encoder.{j}": e for j, e in enumerate(self.encoders)}
        nets["encoder_gate"] = self.gate_net
        return nets


def blend_state(enc: EncoderMixture, s_raw: np.ndarray, z) -> np.ndarray:
    """Single-instance or batched blended state representation."""
    vec = getattr(z, "vector", z)
    return enc.forward(np.asarray(s_raw, dtype=np.float64), np.asarray(vec, dtype=np.float64), cache=False).state
