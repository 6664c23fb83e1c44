from typing import Dict, Sequence, Tuple

import numpy as np

from ..nn import AdamState, DenseNet, mlp


class TwinCritics:
    """Two Q networks over state ⊕ action, each with a Polyak-averaged target."""

    def __init__(
        self,
        q1: DenseNet,
        q2: DenseNet,
        tau: float = 0.005,
        lr: float = 3e-4,
        betas: Tuple[float, float] = (0.9, 0.999),
    ) -> None:
        if not 0.0 < tau <= 1.0:
            raise ValueError(f"polyak tau must lie in (0, 1], got {tau}")
        self.q1, self.q2 = q1, q2
        self.target1, self.target2 = q1.copy(), q2.copy()
        self.tau = tau
        self.opt1 = AdamState.for_net(q1, lr=lr, beta1=betas[0], beta2=betas[1])
        self.opt2 = AdamState.for_net(q2, lr=lr, beta1=betas[0], beta2=betas[1])

    @classmethod
    def build(
        cls,
        input_dim: int,
        action_dim: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        **kwargs,
    ) -> "TwinCritics":
        q1 = mlp(input_dim + action_dim, hidden, 1, rng)
        q2 = mlp(input_dim + action_dim, hidden, 1, rng)
        return cls(q1, q2, **kwargs)

    def target_min(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(
            self.target1.forward(x, cache=False), self.target2.forward(x, cache=False)
        )[:, 0]

    def networks(self) -> Dict[str, DenseNet]:
        return {
            "q1": self.q1,
            "q2": self.q2,
            "q1_target": self.target1,
            "q2_target": self.target2,
        }


def polyak(c: TwinCritics) -> None:
    """target <- (1 - tau) * target + tau * online, for both critics."""
    for online, target in ((c.q1, c.target1), (c.q2, c.target2)):
        for o, t in zip(online.parameters(), target.parameters()):
            t *= 1.0 - c.tau
            t += c.tau * o
