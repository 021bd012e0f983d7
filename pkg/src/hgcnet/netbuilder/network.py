"""Executable HGCNet graphs built from a NetworkSpec."""

from typing import List, Optional

import numpy as np
import structlog

from ..blocks.modules import CompactModule, build_module
from ..engine import functional as F
from ..engine.layers import (
    AvgPool2x2,
    BatchNorm2d,
    Conv2d,
    Flatten,
    GlobalAvgPool,
    Layer,
    Linear,
    ReLU,
    Sequential,
)
from .spec import NetworkSpec

logger = structlog.get_logger(__name__)


class DenseStage(Layer):
    """Densely connected modules: each sees the stage input plus all earlier outputs.

    The stage output is concat(stage input, module 1 output, ..., module k output).
    """

    def __init__(self, modules: List[CompactModule]):
        super().__init__()
        for index, module in enumerate(modules, start=1):
            self.add_child(f"module{index}", module)

    @property
    def modules(self) -> List[CompactModule]:
        return [module for _, module in self.children()]  # type: ignore[misc]

    def forward(self, x: np.ndarray) -> np.ndarray:
        features = [x]
        for module in self.modules:
            features.append(module.forward(F.concat_channels(features)))
        self._cache = [f.shape[1] for f in features]
        return F.concat_channels(features)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        widths = self._pop_cache()
        grads = F.split_channels(grad, widths)
        for k in reversed(range(len(self.modules))):
            # module k consumed features[0..k] and produced features[k+1]
            d_input = self.modules[k].backward(grads[k + 1])
            for j, part in enumerate(F.split_channels(d_input, widths[: k + 1])):
                grads[j] = grads[j] + part
        return grads[0]


class HgcNet(Sequential):
    """stem -> dense stages (avg-pooled between) -> BN -> ReLU -> pool -> linear."""

    def __init__(self, spec: NetworkSpec, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.spec = spec
        placements = spec.module_placements()

        self.add_child(
            "stem", Conv2d(spec.in_channels, spec.stem_channels, kernel=3, pad=1, rng=rng)
        )
        for stage_index in range(1, len(spec.stages) + 1):
            if stage_index > 1:
                self.add_child(f"pool{stage_index - 1}", AvgPool2x2())
            modules = [
                build_module(spec.variant, p.spec, rng=rng)
                for p in placements
                if p.stage == stage_index
            ]
            self.add_child(f"stage{stage_index}", DenseStage(modules))
        self.add_child("norm", BatchNorm2d(spec.feature_channels))
        self.add_child("relu", ReLU())
        self.add_child("pool", GlobalAvgPool())
        self.add_child("flatten", Flatten())
        self.add_child(
            "classifier",
            Linear(spec.feature_channels, spec.num_classes, rng=rng, zero_init=spec.zero_init_head),
        )

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).argmax(axis=1)


def build_network(spec: NetworkSpec, seed: int = 0) -> HgcNet:
    """Instantiate `spec` with weights drawn from `seed`.

    Raises:
        DivisibilityError: a module's widths are not divisible by G; the
            message names the stage and module index
    """
    net = HgcNet(spec, rng=np.random.default_rng(seed))
    logger.info(
        "network_built",
        variant=spec.variant,
        groups=spec.groups,
        stages=spec.stages_text,
        depth=spec.depth,
        params=net.parameter_count(),
    )
    return net
