"""Soft attention over k sub-policies.

All functions accept a single instance (alpha of shape (k,), actions (k, m))
or a batch (alpha (B, k), actions (B, k, m)).
"""

import dataclasses
import logging
from typing import Tuple

import numpy as np

from ..context import ContextEmbedding
from ..nn import DenseNet, softmax, softmax_backward
from ..utils.errors import ShapeError

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-6


@dataclasses.dataclass
class GateWeights:
    alpha: np.ndarray
    logits: np.ndarray

    @property
    def k(self) -> int:
        return self.alpha.shape[-1]

    def argmax(self) -> np.ndarray:
        return np.argmax(self.alpha, axis=-1)


def check_simplex(alpha: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    if np.any(alpha < 0) or np.any(np.abs(alpha.sum(axis=-1) - 1.0) > tol):
        raise ShapeError("gate weights left the probability simplex")


def gate(G: DenseNet, z, cache: bool = True) -> GateWeights:
    """alpha = softmax(G(z)); ``z`` is a ContextEmbedding or a raw array."""
    vec = z.vector if isinstance(z, ContextEmbedding) else np.asarray(z, dtype=np.float64)
    if vec.shape[-1] != G.in_dim:
        raise ShapeError(f"gate expects a {G.in_dim}-dimensional context, got {vec.shape[-1]}")
    logits = G.forward(vec, cache=cache)
    alpha = softmax(logits)
    if __debug__:
        check_simplex(alpha)
    return GateWeights(alpha, logits)


def gate_backward(G: DenseNet, weights: GateWeights, d_alpha: np.ndarray, accumulate_params: bool = True) -> np.ndarray:
    """Backpropagate dL/d(alpha) through softmax and G; returns dL/dz."""
    G.backward(softmax_backward(weights.alpha, d_alpha), accumulate_params)
    return G.tape.input


def _check_rows(acts: np.ndarray, alpha: np.ndarray) -> None:
    if acts.ndim != alpha.ndim + 1 or acts.shape[:-1] != alpha.shape:
        raise ShapeError(f"{acts.shape[-2]} sub-actions cannot be blended with {alpha.shape[-1]} weights")


def blend_actions(acts: np.ndarray, alpha) -> np.ndarray:
    """a = sum_i alpha_i acts[i]."""
    alpha = alpha.alpha if isinstance(alpha, GateWeights) else np.asarray(alpha)
    acts = np.asarray(acts, dtype=np.float64)
    _check_rows(acts, alpha)
    return np.einsum("...k,...km->...m", alpha, acts)


def blend_actions_backward(acts: np.ndarray, alpha: np.ndarray, d_action: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (dL/d acts, dL/d alpha)."""
    d_acts = alpha[..., :, None] * d_action[..., None, :]
    d_alpha = np.einsum("...km,...m->...k", acts, d_action)
    return d_acts, d_alpha


def blend_log_prob(per_policy_log_probs: np.ndarray, alpha):
    """Surrogate composite log-probability sum_i alpha_i log pi_i(a_i|s)."""
    alpha = alpha.alpha if isinstance(alpha, GateWeights) else np.asarray(alpha)
    lps = np.asarray(per_policy_log_probs, dtype=np.float64)
    if lps.shape != alpha.shape:
        raise ShapeError(f"{lps.shape[-1]} log-probabilities cannot be blended with {alpha.shape[-1]} weights")
    return np.sum(alpha * lps, axis=-1)


def blend_log_prob_backward(per_policy_log_probs: np.ndarray, alpha: np.ndarray, d_log_prob) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (dL/d log-probs, dL/d alpha)."""
    d = np.asarray(d_log_prob, dtype=np.float64)[..., None]
    return alpha * d, per_policy_log_probs * d
