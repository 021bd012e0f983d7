"""Central finite-difference checks of analytic backward passes."""

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
import structlog

from .functional import softmax_cross_entropy
from .layers import Layer

logger = structlog.get_logger(__name__)

DEFAULT_TOLERANCE = 1e-4
DEFAULT_EPS = 1e-5
# Input entries this close to zero sit on (or next to) a ReLU kink.
INPUT_KINK_MARGIN = 1e-3
# Entries whose one-sided slopes disagree by more than this are non-smooth.
KINK_TOLERANCE = 1e-4
INPUT_NAME = "input"


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a|, |n|, 1e-8)."""
    scale = max(abs(analytic), abs(numeric), 1e-8)
    return abs(analytic - numeric) / scale


@dataclass
class GradCheckReport:
    max_relative_error: float
    worst_tensor: Optional[str]
    worst_index: Optional[Tuple[int, ...]]
    tolerance: float
    checked: int = 0
    rejected: int = 0
    per_tensor: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance

    @property
    def flagged(self) -> bool:
        return not self.passed


class _Objective:
    """Scalar loss of a layer output: cross-entropy with labels, else <y, R>."""

    def __init__(self, labels: Optional[np.ndarray], rng: np.random.Generator):
        self.labels = labels
        self.rng = rng
        self.projection: Optional[np.ndarray] = None

    def value_and_grad(self, y: np.ndarray) -> Tuple[float, np.ndarray]:
        if self.labels is not None:
            return softmax_cross_entropy(y, self.labels)
        if self.projection is None:
            self.projection = self.rng.standard_normal(y.shape).astype(y.dtype)
        return float(np.sum(y * self.projection)), self.projection

    def value(self, y: np.ndarray) -> float:
        return self.value_and_grad(y)[0]


def _sample_indices(
    array: np.ndarray, limit: Optional[int], rng: np.random.Generator
) -> Iterator[Tuple[int, ...]]:
    flat = np.arange(array.size)
    if limit is not None and array.size > limit:
        flat = np.sort(rng.choice(array.size, size=limit, replace=False))
    for index in flat:
        yield tuple(int(i) for i in np.unravel_index(index, array.shape))


def grad_check(
    layer: Layer,
    x: np.ndarray,
    labels: Optional[np.ndarray] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    eps: float = DEFAULT_EPS,
    max_entries: Optional[int] = 64,
    seed: int = 0,
    check_input: bool = True,
    dtype: np.dtype = np.float64,
) -> GradCheckReport:
    """Compare a layer's backward pass against central differences.

    The layer is replicated in `dtype` first, so the original is untouched.
    At most `max_entries` entries per tensor are perturbed, chosen by `seed`.
    Entries where a perturbation crosses a non-differentiable point are
    rejected and counted, not scored. The check reports; it never raises on
    a mismatch.

    Args:
        layer: layer (or whole graph) under test
        x: input tensor
        labels: class labels; when given, the loss is softmax cross-entropy
        tolerance: pass threshold on the maximum relative error
        eps: finite-difference step
        max_entries: per-tensor sample cap, None for every entry
        seed: seeds both the entry sampling and the random projection
        check_input: also check the gradient with respect to x

    Returns:
        GradCheckReport with the worst relative error and where it occurred
    """
    rng = np.random.default_rng(seed)
    replica = layer.replicate(dtype)
    x = np.array(x, dtype=dtype)
    objective = _Objective(labels, rng)

    replica.zero_grad()
    _, upstream = objective.value_and_grad(replica.forward(x))
    dx = replica.backward(upstream)

    targets = [(name, param.value, param.grad) for name, param in replica.named_parameters()]
    if check_input:
        targets.append((INPUT_NAME, x, dx))

    report = GradCheckReport(
        max_relative_error=0.0, worst_tensor=None, worst_index=None, tolerance=tolerance
    )
    for name, value, grad in targets:
        worst = 0.0
        for index in _sample_indices(value, max_entries, rng):
            if name == INPUT_NAME and abs(value[index]) < INPUT_KINK_MARGIN:
                report.rejected += 1
                continue
            original = value[index]
            value[index] = original + eps
            f_plus = objective.value(replica.forward(x))
            value[index] = original - eps
            f_minus = objective.value(replica.forward(x))
            value[index] = original
            f_zero = objective.value(replica.forward(x))

            slope_plus = (f_plus - f_zero) / eps
            slope_minus = (f_zero - f_minus) / eps
            if relative_error(slope_plus, slope_minus) > KINK_TOLERANCE and abs(
                slope_plus - slope_minus
            ) > 1e-7:
                report.rejected += 1
                continue

            numeric = (f_plus - f_minus) / (2 * eps)
            error = relative_error(float(grad[index]), numeric)
            report.checked += 1
            worst = max(worst, error)
            if error > report.max_relative_error or report.worst_tensor is None:
                report.max_relative_error = max(error, report.max_relative_error)
                report.worst_tensor = name
                report.worst_index = index
        report.per_tensor[name] = worst

    logger.debug(
        "grad_check_completed",
        layer=type(layer).__name__,
        max_relative_error=report.max_relative_error,
        worst_tensor=report.worst_tensor,
        checked=report.checked,
        rejected=report.rejected,
    )
    return report
