"""Pytest fixtures and configuration."""

import numpy as np
import pytest

from hybridkernels.domain.ring import FloatRing, ModularRing
from hybridkernels.domain.settings import AppSettings
from hybridkernels.domain.tensors import Matrix, Tensor
from hybridkernels.kernels.config import KernelConfig


@pytest.fixture
def int_ring():
    """Exact integer ring used for bit-exact comparisons."""
    return ModularRing()


@pytest.fixture
def f64_ring():
    """Float64 ring with default tolerances."""
    return FloatRing()


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same operands."""
    return np.random.default_rng(20240601)


@pytest.fixture
def make_matrix(int_ring, rng):
    """Factory fixture for random matrices."""

    def _make(rows, cols=None, ring=None, zero=False):
        ring = ring or int_ring
        cols = rows if cols is None else cols
        if zero:
            return Matrix.create(rows, cols, ring)
        return Matrix.from_array(ring.random(rng, (rows, cols)), ring)

    return _make


@pytest.fixture
def make_tensor(int_ring, rng):
    """Factory fixture for random hypercube tensors."""

    def _make(order, side, ring=None, zero=False):
        ring = ring or int_ring
        if zero:
            return Tensor.create(order, side, ring)
        return Tensor.from_array(ring.random(rng, (side,) * order), ring)

    return _make


@pytest.fixture
def settings():
    """Default application settings."""
    return AppSettings()


@pytest.fixture
def unit_config():
    """Base threshold 1: every recursion runs down to scalars."""
    return KernelConfig(base=1)
