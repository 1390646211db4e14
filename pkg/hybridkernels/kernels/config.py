"""Build-time options shared by all kernel builders."""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

from hybridkernels.domain.settings import KernelSettings
from hybridkernels.domain.tensors import is_power_of_two


class FaultInjection(Enum):
    """Deliberate defects for exercising the race checker."""

    NONE = "none"
    OVERLAP_PLANES = "overlap-planes"  # sibling groups share one plane range


@dataclass(frozen=True, slots=True)
class KernelConfig:
    """Thresholds used while building task trees."""

    base: int = 8  # matrix side (or max extent) handled by one serial leaf
    block_size: int = 8  # B: elements per reducer block
    tc_base_footprint: int = 512  # |X| + |U| + |V| handled by one serial leaf
    fault: FaultInjection = FaultInjection.NONE

    def __post_init__(self) -> None:
        """Validate thresholds."""
        if not is_power_of_two(self.base):
            raise ValueError(f"base must be a power of two, got {self.base}")
        if not is_power_of_two(self.block_size):
            raise ValueError(f"block_size must be a power of two, got {self.block_size}")
        if self.tc_base_footprint < 3:
            raise ValueError("tc_base_footprint must be at least 3")

    @classmethod
    def from_settings(
        cls, settings: KernelSettings, fault: FaultInjection = FaultInjection.NONE
    ) -> "KernelConfig":
        return cls(
            base=settings.mm_base,
            block_size=settings.block_size,
            tc_base_footprint=settings.tc_base_footprint,
            fault=fault,
        )

    def with_updates(self, **changes: Any) -> "KernelConfig":
        return replace(self, **changes)


DEFAULT_CONFIG = KernelConfig()
