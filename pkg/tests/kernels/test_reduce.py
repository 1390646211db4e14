"""Tests for the blocked reducers."""

import numpy as np
import pytest

from hybridkernels.domain.errors import ShapeError
from hybridkernels.domain.models import CacheConfig
from hybridkernels.domain.tensors import PlaneSet
from hybridkernels.engine.instrumented import run_instrumented
from hybridkernels.engine.races import check_race_freedom
from hybridkernels.kernels.config import KernelConfig
from hybridkernels.kernels.reduce import mm_reduce2, mm_reduce_r, tc_reduce_r
from hybridkernels.services.cache_sim import simulate


def _fill(planes, ring, rng):
    planes.first.buffer.data[:] = ring.random(rng, (planes.first.buffer.size,))


class TestReduce2:
    """Tests for the two-operand reducer."""

    def test_adds_elementwise(self, make_matrix, int_ring):
        """X <- X + Y."""
        x, y = make_matrix(8), make_matrix(8)
        expected = x.to_numpy()
        int_ring.add_into(expected, y.to_numpy())
        run_instrumented(mm_reduce2(x, y))

        assert np.array_equal(x.to_numpy(), expected)

    def test_span(self, make_matrix):
        """Span is log rows + log blocks + block length."""
        x, y = make_matrix(16), make_matrix(16)
        metrics = run_instrumented(mm_reduce2(x, y, KernelConfig(block_size=4)), execute=False)

        assert metrics.metrics.span == 4 + 2 + 4

    def test_shape_mismatch(self, make_matrix):
        """Both operands share a shape."""
        with pytest.raises(ShapeError):
            mm_reduce2(make_matrix(4), make_matrix(8))


class TestReduceR:
    """Tests for the r-plane reducer."""

    @pytest.mark.parametrize("r", [2, 4, 8])
    def test_folds_into_plane_zero(self, r, int_ring, rng):
        """Plane 0 ends up holding the sum of all planes."""
        planes = PlaneSet.matrices(r, 8, 8, int_ring)
        _fill(planes, int_ring, rng)
        expected = int_ring.zeros((8, 8))
        for plane in planes.planes:
            int_ring.add_into(expected, plane.to_numpy())

        tree = mm_reduce_r(planes, 8, 8)
        assert check_race_freedom(tree).ok
        run_instrumented(tree)
        assert np.array_equal(planes.first.to_numpy(), expected)

    def test_single_plane_is_empty(self, int_ring):
        """With one plane nothing is done."""
        tree = mm_reduce_r(PlaneSet.matrices(1, 4, 4, int_ring), 4, 4)

        assert tree.label == "reduce_r"
        assert tree.children == ()
        assert run_instrumented(tree).metrics.work == 0

    def test_costs(self, int_ring):
        """Blocks cost B r work and B + ceil(log2 r) span."""
        planes = PlaneSet.matrices(4, 4, 4, int_ring)
        metrics = run_instrumented(mm_reduce_r(planes, 4, 4), execute=False).metrics

        assert metrics.work == 3 + 4 * 16
        assert metrics.span == 2 + 0 + 4 + 2

    def test_wrong_shape(self, int_ring):
        """The planes must match the declared shape."""
        with pytest.raises(ShapeError):
            mm_reduce_r(PlaneSet.matrices(2, 4, 4, int_ring), 8, 8)

    def test_line_size_doubling_halves_misses(self, int_ring):
        """Streaming reductions miss once per line: doubling B halves Q1."""
        planes = PlaneSet.matrices(4, 32, 32, int_ring)
        trace = run_instrumented(
            mm_reduce_r(planes, 32, 32, KernelConfig(block_size=16)),
            execute=False,
            record_trace=True,
        ).trace
        narrow = simulate(trace, CacheConfig(1024, 4)).misses
        wide = simulate(trace, CacheConfig(1024, 8)).misses

        assert 1.8 <= narrow / wide <= 2.2


class TestTensorReduce:
    """Tests for the tensor-plane reducer."""

    def test_folds_tensor_planes(self, int_ring, rng):
        """Tensor planes fold through their matrix reinterpretation."""
        planes = PlaneSet.tensors(4, 3, 2, int_ring)
        planes.first.buffer.data[:] = int_ring.random(rng, (32,))
        expected = int_ring.zeros((2, 2, 2))
        for plane in planes.planes:
            int_ring.add_into(expected, plane.to_numpy())

        run_instrumented(tc_reduce_r(planes, 2))
        assert np.array_equal(planes.first.to_numpy(), expected)
