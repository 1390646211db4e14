"""Unit tests for AppSettings."""

import pytest
from pydantic import ValidationError

from hybridkernels.domain.settings import AppSettings, KernelSettings


class TestAppSettings:
    """Tests for AppSettings model."""

    def test_default_settings(self, settings):
        """Default settings are created correctly."""
        assert settings.kernels.mm_base == 8
        assert settings.kernels.block_size == 8
        assert settings.kernels.tc_base_footprint == 512
        assert settings.cache.capacity == 2048
        assert settings.cache.line_size == 8
        assert settings.run.seed == 42
        assert settings.run.scalar == "int"
        assert settings.cost.call_overhead == 1

    def test_base_must_be_power_of_two(self, settings):
        """mm_base and block_size are powers of two."""
        with pytest.raises(ValidationError):
            settings.kernels.mm_base = 3
        with pytest.raises(ValidationError):
            KernelSettings(block_size=6)

    def test_scalar_mode_values(self, settings):
        """Scalar mode accepts int and f64 only."""
        settings.run.scalar = "f64"
        assert settings.run.scalar == "f64"
        with pytest.raises(ValidationError):
            settings.run.scalar = "f32"

    def test_log_level_validated(self, settings):
        """Log level must be a logging level name."""
        settings.logging.level = "DEBUG"
        with pytest.raises(ValidationError):
            settings.logging.level = "LOUD"

    def test_cost_units_positive(self, settings):
        """Unit costs are at least one."""
        with pytest.raises(ValidationError):
            settings.cost.fork_unit = 0

    def test_unknown_section_rejected(self):
        """Unknown top-level keys are refused."""
        with pytest.raises(ValidationError):
            AppSettings.model_validate({"theme": {"mode": "dark"}})

    def test_serialization_round_trip(self, settings):
        """model_dump / model_validate preserve values."""
        settings.kernels.mm_base = 1
        settings.cache.capacity = 512
        restored = AppSettings.model_validate(settings.model_dump())

        assert restored.kernels.mm_base == 1
        assert restored.cache.capacity == 512
