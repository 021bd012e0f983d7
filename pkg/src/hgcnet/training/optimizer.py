"""SGD with Nesterov momentum; weight decay follows each parameter's decay tag."""

from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
import structlog

from ..core.exceptions import ShapeError, TrainingError
from ..engine.tensor import Parameter

logger = structlog.get_logger(__name__)


def sgd_nesterov_step(
    param: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
    weight_decay: float,
    decay: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """One update in the lookahead form.

    g = grad + wd * param (only when `decay`); v = mu * v + g;
    param = param - lr * (g + mu * v).

    Returns:
        (new param, new velocity)
    """
    if param.shape != grad.shape or param.shape != velocity.shape:
        raise ShapeError(
            f"param {param.shape}, grad {grad.shape} and velocity {velocity.shape} differ"
        )
    g = grad + weight_decay * param if decay and weight_decay else grad
    velocity = momentum * velocity + g
    update = g + momentum * velocity
    return (param - lr * update).astype(param.dtype, copy=False), velocity.astype(
        param.dtype, copy=False
    )


class SGD:
    """Keeps one velocity per named parameter; BN and bias tensors skip decay."""

    def __init__(
        self,
        params: Iterable[Tuple[str, Parameter]],
        momentum: float = 0.9,
        weight_decay: float = 1e-4,
    ):
        self.params: Dict[str, Parameter] = dict(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Dict[str, np.ndarray] = {
            name: np.zeros_like(p.value) for name, p in self.params.items()
        }

    @property
    def decayed(self) -> Dict[str, bool]:
        return {name: p.decay for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self, lr: float, epoch: Optional[int] = None) -> None:
        """Apply one update to every parameter.

        Raises:
            TrainingError: a gradient holds NaN or Inf; nothing is updated
        """
        for name, param in self.params.items():
            if not np.all(np.isfinite(param.grad)):
                logger.error("non_finite_gradient", param=name, epoch=epoch)
                raise TrainingError(
                    f"non-finite gradient in {name} at epoch {epoch}; aborting the epoch"
                )
        for name, param in self.params.items():
            param.value, self.velocity[name] = sgd_nesterov_step(
                param.value,
                param.grad,
                self.velocity[name],
                lr,
                self.momentum,
                self.weight_decay,
                decay=param.decay,
            )

    def load_velocity(self, velocity: Mapping[str, np.ndarray]) -> None:
        for name, value in velocity.items():
            if name not in self.velocity:
                raise KeyError(name)
            self.velocity[name] = value.astype(self.params[name].value.dtype, copy=True)
