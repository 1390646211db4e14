"""Run settings with Pydantic validation.

Settings are stored as JSON and validated using Pydantic models. CLI flags
override individual fields after loading.
"""

from typing import Optional

from pydantic import BaseModel, Field, field_validator

from hybridkernels.domain.tensors import is_power_of_two


def _require_power_of_two(value: int) -> int:
    if not is_power_of_two(value):
        raise ValueError(f"must be a power of two, got {value}")
    return value


class CostModelSettings(BaseModel):
    """Unit costs charged by the instrumented executor."""

    leaf_unit: int = Field(default=1, ge=1)  # per multiply-add or element move
    call_overhead: int = Field(default=1, ge=1)  # per recursive call
    fork_unit: int = Field(default=1, ge=1)  # per binary fork or join level
    alloc_unit: int = Field(default=1, ge=1)  # per log2 level of an allocation

    model_config = {"validate_assignment": True}


class KernelSettings(BaseModel):
    """Recursion thresholds and reducer block size."""

    mm_base: int = Field(default=8, ge=1, le=1024)
    tc_base_footprint: int = Field(default=512, ge=3)
    block_size: int = Field(default=8, ge=1, le=4096)

    model_config = {"validate_assignment": True}

    @field_validator("mm_base", "block_size")
    @classmethod
    def _powers_of_two(cls, value: int) -> int:
        return _require_power_of_two(value)


class CacheSettings(BaseModel):
    """Ideal-cache parameters for Q1 simulation."""

    capacity: int = Field(default=2048, ge=1)  # M, words
    line_size: int = Field(default=8, ge=1)  # B, words
    alpha: float = Field(default=1.0, gt=0.0)
    enforce_tall_cache: bool = True

    model_config = {"validate_assignment": True}


class ToleranceSettings(BaseModel):
    """Comparison tolerances for float64 runs."""

    rtol: float = Field(default=1e-9, ge=0.0)
    atol: float = Field(default=1e-9, ge=0.0)

    model_config = {"validate_assignment": True}


class RunSettings(BaseModel):
    """Per-run options."""

    seed: int = Field(default=42, ge=0)
    scalar: str = Field(default="int", pattern="^(int|f64)$")
    threads: int = Field(default=4, ge=1, le=256)
    debug_race_check: bool = True

    model_config = {"validate_assignment": True}


class LoggingSettings(BaseModel):
    """Logging configuration."""

    level: str = Field(default="WARNING", pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")
    log_file: Optional[str] = None

    model_config = {"validate_assignment": True}


class AppSettings(BaseModel):
    """Root settings model.

    Example:
        >>> settings = AppSettings()
        >>> settings.kernels.mm_base = 1
    """

    cost: CostModelSettings = Field(default_factory=CostModelSettings)
    kernels: KernelSettings = Field(default_factory=KernelSettings)
    cache: CacheSettings = Field(default_factory=CacheSettings)
    tolerance: ToleranceSettings = Field(default_factory=ToleranceSettings)
    run: RunSettings = Field(default_factory=RunSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)

    model_config = {"validate_assignment": True, "extra": "forbid"}
