"""Central finite-difference checks of analytic gradients."""

import dataclasses
import logging
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import NumericError, StateError
from .dense import DenseNet

logger = logging.getLogger(__name__)

KINK_MARGIN = 1e-3

# loss_fn(net, point) -> (loss, dloss/d(net output))
LossFn = Callable[[DenseNet, Any], Tuple[float, np.ndarray]]


@dataclasses.dataclass
class GradCheckReport:
    max_rel_err: float
    tol: float
    checked: int
    worst_index: Tuple[int, int] = (-1, -1)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol


def _finite_loss(loss: float) -> float:
    loss = float(loss)
    if not np.isfinite(loss):
        raise NumericError(f"loss is not finite: {loss}")
    return loss


def numeric_gradient(
    params: Sequence[np.ndarray], loss: Callable[[], float], h: float = 1e-5
) -> List[np.ndarray]:
    """Central differences of ``loss()`` wrt every entry of ``params``.

    Arrays are perturbed in place and restored exactly.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = _finite_loss(loss())
            flat[i] = orig - h
            down = _finite_loss(loss())
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def compare_gradients(
    analytic: Sequence[np.ndarray],
    numeric: Sequence[np.ndarray],
    tol: float,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Max over entries of |a - n| / max(|a| + |n|, floor)."""
    worst, where, count = 0.0, (-1, -1), 0
    for k, (a, n) in enumerate(zip(analytic, numeric)):
        a, n = np.asarray(a).reshape(-1), np.asarray(n).reshape(-1)
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)
        count += rel.size
        if rel.size and rel.max() > worst:
            worst, where = float(rel.max()), (k, int(rel.argmax()))
    return GradCheckReport(max_rel_err=worst, tol=tol, checked=count, worst_index=where)


def near_kink(net: DenseNet, margin: float = KINK_MARGIN) -> bool:
    """True if any cached relu pre-activation is within ``margin`` of zero."""
    try:
        pres = net.pre_activations()
    except StateError:
        return False
    return any(
        act == "relu" and np.any(np.abs(pre) < margin)
        for pre, act in zip(pres, net.activations)
    )


def grad_check(
    net: DenseNet,
    loss_fn: LossFn,
    tol: float = 1e-4,
    *,
    point: Any = None,
    sample_point: Optional[Callable[[np.random.Generator], Any]] = None,
    rng: Optional[np.random.Generator] = None,
    h: float = 1e-5,
    max_resamples: int = 50,
) -> GradCheckReport:
    """Compare ``net.backward`` against central differences of ``loss_fn``.

    With ``sample_point`` the evaluation point is drawn from ``rng`` and
    redrawn while it sits within ``KINK_MARGIN`` of a relu kink, where finite
    differences are meaningless.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for attempt in range(max_resamples + 1):
        if sample_point is not None:
            point = sample_point(rng)
        net.zero_grad()
        loss, upstream = loss_fn(net, point)
        _finite_loss(loss)
        if sample_point is None or not near_kink(net):
            break
        logger.debug("evaluation point near a relu kink, resampling (attempt %d)", attempt + 1)
    else:
        logger.warning("could not move away from relu kinks after %d resamples", max_resamples)
    analytic = [a.copy() for a in net.backward(upstream).arrays()]
    net.zero_grad()
    numeric = numeric_gradient(net.parameters(), lambda: loss_fn(net, point)[0], h)
    report = compare_gradients(analytic, numeric, tol)
    logger.debug("grad check: max relative error %.3g over %d entries", report.max_rel_err, report.checked)
    return report
