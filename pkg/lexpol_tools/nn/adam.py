import dataclasses
from typing import List, Sequence

import numpy as np

from ..utils.errors import NumericError, ShapeError
from .dense import DenseNet, GradTape


@dataclasses.dataclass
class AdamState:
    """Adam moments for a list of parameter arrays."""

    m: List[np.ndarray]
    v: List[np.ndarray]
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0

    @classmethod
    def for_arrays(cls, params: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls(
            m=[np.zeros_like(p, dtype=np.float64) for p in params],
            v=[np.zeros_like(p, dtype=np.float64) for p in params],
            **hyper,
        )

    @classmethod
    def for_net(cls, net: DenseNet, **hyper) -> "AdamState":
        return cls.for_arrays(net.parameters(), **hyper)

    def arrays(self) -> List[np.ndarray]:
        return [*self.m, *self.v]


def adam_update(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> None:
    """One bias-corrected Adam step, in place.

    Raises NumericError without touching parameters, moments or the step
    count if any gradient or updated parameter would be non-finite.
    """
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError(
            f"Adam got {len(params)} parameters, {len(grads)} gradients and {len(state.m)} moment buffers"
        )
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"Adam shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericError("Adam got non-finite gradients")
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    updates = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * g * g
        p_new = p - state.lr * (m_new / c1) / (np.sqrt(v_new / c2) + state.epsilon)
        if not np.all(np.isfinite(p_new)):
            raise NumericError("Adam update produced non-finite parameters")
        updates.append((m_new, v_new, p_new))
    for p, m, v, (m_new, v_new, p_new) in zip(params, state.m, state.v, updates):
        m[...] = m_new
        v[...] = v_new
        p[...] = p_new
    state.step = t


def adam_step(net: DenseNet, tape: GradTape, state: AdamState) -> DenseNet:
    """Apply ``tape`` to ``net`` and zero the tape."""
    adam_update(net.parameters(), tape.arrays(), state)
    tape.zero()
    return net
