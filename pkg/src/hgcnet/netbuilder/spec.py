"""Declarative network description and the named presets."""

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..blocks.modules import (
    DEFAULT_BOTTLENECK_FACTOR,
    HgcModuleSpec,
)
from ..blocks.se import DEFAULT_SE_REDUCTION
from ..core.exceptions import ConfigurationError, DivisibilityError, ValidationError

PRESETS_PATH = Path(__file__).with_name("presets.yaml")

# Short keys accepted in network spec files.
KEY_ALIASES = {"se": "use_se", "classes": "num_classes", "stem": "stem_channels"}


@lru_cache(maxsize=1)
def load_presets() -> Dict[str, Dict[str, Any]]:
    with PRESETS_PATH.open(encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def preset_names() -> List[str]:
    return sorted(load_presets())


def parse_stages(text: str) -> List[Dict[str, int]]:
    """Parse "4x8,4x16,5x32" into stage dicts (modules x growth rate)."""
    stages = []
    for item in str(text).split(","):
        item = item.strip().lower()
        if not item:
            continue
        modules, sep, growth = item.partition("x")
        if not sep or not modules.strip().isdigit() or not growth.strip().isdigit():
            raise ValueError(f"stage {item!r} is not of the form <modules>x<growth_rate>")
        stages.append({"num_modules": int(modules), "growth_rate": int(growth)})
    return stages


class StageSpec(BaseModel):
    num_modules: int = Field(..., ge=1, description="Densely connected modules in the stage")
    growth_rate: int = Field(..., ge=1, description="Output channels of each module")


@dataclass(frozen=True)
class ModulePlacement:
    stage: int
    index: int
    spec: HgcModuleSpec

    @property
    def name(self) -> str:
        return f"stage{self.stage}.module{self.index}"


class NetworkSpec(BaseModel):
    """An HGCNet / SGCNet / bottleneck network.

    Growth rates double from one stage to the next. A 2x2 average pool sits
    between stages, so `image_size` must survive len(stages) - 1 halvings.
    """

    model_config = ConfigDict(extra="forbid")

    stages: List[StageSpec] = Field(
        default_factory=lambda: [
            StageSpec(num_modules=4, growth_rate=8),
            StageSpec(num_modules=4, growth_rate=16),
            StageSpec(num_modules=5, growth_rate=32),
        ]
    )
    groups: int = Field(default=4, ge=1, description="Groups G of every 1x1 reduction")
    variant: Literal["hgc", "sgc", "bottleneck"] = "hgc"
    use_se: bool = False
    num_classes: int = Field(default=10, ge=2)
    stem_channels: int = Field(default=16, ge=1)
    bottleneck_factor: int = Field(default=DEFAULT_BOTTLENECK_FACTOR, ge=1)
    se_reduction: int = Field(default=DEFAULT_SE_REDUCTION, ge=1)
    in_channels: int = Field(default=3, ge=1, description="Image channels")
    image_size: int = Field(default=32, ge=1)
    preset: Optional[str] = None
    zero_init_head: bool = Field(default=True, description="Start the classifier at zero")

    @model_validator(mode="before")
    @classmethod
    def apply_preset(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = {KEY_ALIASES.get(key, key): value for key, value in data.items()}
        name = data.get("preset")
        if not name:
            return data
        presets = load_presets()
        if name not in presets:
            raise ValueError(f"unknown preset {name!r}, expected one of {preset_names()}")
        base = {KEY_ALIASES.get(key, key): value for key, value in presets[name].items()}
        return {**base, **data}

    @field_validator("stages", mode="before")
    @classmethod
    def parse_stage_string(cls, v: Any) -> Any:
        if isinstance(v, str):
            return parse_stages(v)
        return v

    @model_validator(mode="after")
    def check_layout(self) -> "NetworkSpec":
        if not self.stages:
            raise ValueError("a network needs at least one stage")
        for prev, stage in zip(self.stages, self.stages[1:]):
            if stage.growth_rate != 2 * prev.growth_rate:
                raise ValueError(
                    f"growth rates must double across stages, got "
                    f"{[s.growth_rate for s in self.stages]}"
                )
        if self.image_size % 2 ** (len(self.stages) - 1):
            raise ValueError(
                f"image_size {self.image_size} cannot be halved {len(self.stages) - 1} times"
            )
        return self

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> "NetworkSpec":
        try:
            return cls.model_validate({"preset": name, **overrides})
        except ValueError as e:
            raise ConfigurationError(str(e)) from e

    @property
    def total_modules(self) -> int:
        return sum(stage.num_modules for stage in self.stages)

    @property
    def depth(self) -> int:
        """Conv layers: three per module plus stem and classifier."""
        return 3 * self.total_modules + 2

    @property
    def stages_text(self) -> str:
        return ",".join(f"{s.num_modules}x{s.growth_rate}" for s in self.stages)

    def stage_input_channels(self) -> List[int]:
        widths, channels = [], self.stem_channels
        for stage in self.stages:
            widths.append(channels)
            channels += stage.num_modules * stage.growth_rate
        return widths

    @property
    def feature_channels(self) -> int:
        """Width of the final stage output fed to the classifier."""
        last = self.stages[-1]
        return self.stage_input_channels()[-1] + last.num_modules * last.growth_rate

    def module_placements(self) -> List[ModulePlacement]:
        """Every module's spec, in build order.

        Raises:
            DivisibilityError: naming the stage and module that cannot be split
                into `groups`
        """
        groups = 1 if self.variant == "bottleneck" else self.groups
        placements = []
        for stage_index, (stage, width) in enumerate(
            zip(self.stages, self.stage_input_channels()), start=1
        ):
            for module_index in range(1, stage.num_modules + 1):
                in_channels = width + (module_index - 1) * stage.growth_rate
                try:
                    spec = HgcModuleSpec(
                        in_channels=in_channels,
                        growth_rate=stage.growth_rate,
                        groups=groups,
                        use_se=self.use_se,
                        se_reduction=self.se_reduction,
                        bottleneck_factor=self.bottleneck_factor,
                    )
                except (DivisibilityError, ValidationError) as e:
                    raise type(e)(f"stage {stage_index} module {module_index}: {e}") from e
                placements.append(ModulePlacement(stage_index, module_index, spec))
        return placements
