"""Tanh-squashed Gaussian policy heads."""

import dataclasses
import math
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from ..nn import DenseNet, mlp
from ..utils.errors import NumericError, ShapeError

SampleMode = Literal["stochastic", "deterministic"]

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)


def log_one_minus_tanh_sq(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2) without cancellation for large |u|."""
    return 2.0 * (LOG_2 - u - np.logaddexp(0.0, -2.0 * u))


@dataclasses.dataclass
class ActionSample:
    """Everything a backward pass through the squash needs, batched."""

    action: np.ndarray
    log_prob: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray
    noise: np.ndarray
    in_bounds: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


class GaussianPolicyHead:
    """Trunk network whose output splits into mean and log-std halves.

    Args:
        trunk: state -> 2m network
        log_std_bounds: clamp applied to the log-std half
    """

    def __init__(self, trunk: DenseNet, log_std_bounds: Tuple[float, float] = (-20.0, 2.0)) -> None:
        if trunk.out_dim % 2:
            raise ShapeError(f"policy trunk must output 2m values, got {trunk.out_dim}")
        lo, hi = log_std_bounds
        if not lo < hi:
            raise ShapeError(f"log-std bounds must be increasing, got {log_std_bounds}")
        self.trunk = trunk
        self.log_std_bounds = (float(lo), float(hi))

    @classmethod
    def build(
        cls,
        state_dim: int,
        action_dim: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        log_std_bounds: Tuple[float, float] = (-20.0, 2.0),
        final_scale: float = 0.01,
    ) -> "GaussianPolicyHead":
        return cls(mlp(state_dim, hidden, 2 * action_dim, rng, final_scale=final_scale), log_std_bounds)

    @property
    def state_dim(self) -> int:
        return self.trunk.in_dim

    @property
    def action_dim(self) -> int:
        return self.trunk.out_dim // 2

    def sample(
        self,
        states: np.ndarray,
        rng: Optional[np.random.Generator] = None,
        deterministic: bool = False,
        cache: bool = True,
    ) -> ActionSample:
        """Batched reparameterized sample; ``states`` has shape (B, ds)."""
        out = self.trunk.forward(states, cache=cache)
        if not np.all(np.isfinite(out)):
            raise NumericError("policy network produced non-finite outputs")
        m = self.action_dim
        mean, raw_log_std = out[:, :m], out[:, m:]
        lo, hi = self.log_std_bounds
        log_std = np.clip(raw_log_std, lo, hi)
        in_bounds = (raw_log_std >= lo) & (raw_log_std <= hi)
        if deterministic:
            noise = np.zeros_like(mean)
        else:
            if rng is None:
                raise ShapeError("stochastic sampling needs a random generator")
            noise = rng.standard_normal(mean.shape)
        u = mean + np.exp(log_std) * noise
        action = np.tanh(u)
        log_prob = np.sum(
            -0.5 * noise * noise - log_std - HALF_LOG_2PI - log_one_minus_tanh_sq(u), axis=-1
        )
        return ActionSample(action, log_prob, mean, log_std, noise, in_bounds)

    def backward(
        self,
        sample: ActionSample,
        d_action: np.ndarray,
        d_log_prob: np.ndarray,
        accumulate_params: bool = True,
    ) -> np.ndarray:
        """Backpropagate through squash and reparameterization; returns dL/ds.

        Must follow the ``sample`` call (with caching) that produced
        ``sample``.
        """
        a, std, eps = sample.action, sample.std, sample.noise
        gl = np.asarray(d_log_prob, dtype=np.float64).reshape(-1, 1)
        # dlogp/du = 2 tanh(u); da/du = 1 - tanh(u)^2
        gu = d_action * (1.0 - a * a) + gl * 2.0 * a
        g_mean = gu
        g_log_std = (gu * std * eps - gl) * sample.in_bounds
        self.trunk.backward(np.concatenate([g_mean, g_log_std], axis=-1), accumulate_params)
        return self.trunk.tape.input


def sample_action(
    head: GaussianPolicyHead,
    s: np.ndarray,
    mode: SampleMode = "stochastic",
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, float]:
    """Single-state convenience wrapper around ``GaussianPolicyHead.sample``."""
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise NumericError("state contains non-finite values")
    sample = head.sample(s[None, :], rng, deterministic=mode == "deterministic", cache=False)
    return sample.action[0], float(sample.log_prob[0])
