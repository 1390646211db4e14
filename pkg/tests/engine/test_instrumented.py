"""Tests for the instrumented executor and its cost model."""

import numpy as np
import pytest

from hybridkernels.domain.tensors import Matrix
from hybridkernels.engine.instrumented import (
    CostModel,
    ceil_log2,
    collect_leaves,
    normalize_buffer_ids,
    run_instrumented,
)
from hybridkernels.engine.tasks import READ, TRACE_DTYPE, WRITE, NullAction, TaskNode
from hybridkernels.kernels.mm import mm, mm_hd


def _leaf(matrix, work):
    return TaskNode.leaf(NullAction((), (matrix,)), work=work)


class TestCostModel:
    """Tests for the unit cost conventions."""

    def test_ceil_log2(self):
        """ceil(log2 k), zero for k <= 1."""
        assert [ceil_log2(k) for k in (0, 1, 2, 3, 4, 5, 8, 9)] == [0, 0, 1, 2, 2, 3, 3, 4]

    def test_fork_and_parallel_for(self):
        """Fork pays spawn and join; parallel-for pays the spawn tree once."""
        cost = CostModel()
        assert cost.fork(4) == (6, 4)
        assert cost.parallel_for(4) == (3, 2)
        assert cost.fork(1) == (0, 0)

    def test_alloc(self):
        """Allocating s elements costs ceil(log2(s + 1))."""
        assert CostModel().alloc(7) == 3
        assert CostModel().alloc(8) == 4

    def test_rejects_nonpositive_units(self):
        """Every unit cost is a positive integer."""
        with pytest.raises(ValueError):
            CostModel(fork_unit=0)

    def test_from_settings(self, settings):
        """Settings map onto the model field by field."""
        settings.cost.call_overhead = 3
        assert CostModel.from_settings(settings.cost).call_overhead == 3


class TestRunInstrumented:
    """Tests for work, span and space accounting."""

    def test_fork_of_leaves(self, int_ring):
        """Work sums, span takes the longest child plus 2 ceil(log2 k)."""
        m = Matrix.create(4, 4, int_ring)
        leaves = [_leaf(m.quadrant(q), w) for q, w in zip(("11", "12", "21", "22"), (1, 2, 3, 4))]
        metrics = run_instrumented(TaskNode.fork(leaves)).metrics

        assert metrics.work == 10 + 6
        assert metrics.span == 4 + 4
        assert metrics.forks == 1
        assert metrics.leaf_count == 4

    def test_sequence_overhead(self, int_ring):
        """A sequence charges its overhead once, then its children in turn."""
        m = Matrix.create(2, 2, int_ring)
        tree = TaskNode.sequence([_leaf(m, 3), _leaf(m, 5)], overhead=1)
        metrics = run_instrumented(tree).metrics

        assert (metrics.work, metrics.span) == (9, 9)

    def test_parallel_for(self, int_ring):
        """A parallel-for of k iterations adds k - 1 work and ceil(log2 k) span."""
        m = Matrix.create(4, 4, int_ring)
        rows = [_leaf(m.row(i), 4) for i in range(4)]
        metrics = run_instrumented(TaskNode.parallel_for(rows)).metrics

        assert (metrics.work, metrics.span) == (16 + 3, 4 + 2)

    def test_call_overhead_scales(self, int_ring):
        """Cost-model constants scale the matching charges."""
        m = Matrix.create(2, 2, int_ring)
        tree = TaskNode.sequence([_leaf(m, 1)], overhead=1)
        metrics = run_instrumented(tree, CostModel(call_overhead=5, leaf_unit=2)).metrics

        assert metrics.work == 5 + 2

    @pytest.mark.parametrize("n", [1, 2, 4, 8])
    def test_mm_span_closed_form(self, n, make_matrix, unit_config):
        """With base 1 the classic recursion has span 10n - 9."""
        x = make_matrix(n, zero=True)
        metrics = run_instrumented(
            mm(x, make_matrix(n), make_matrix(n), unit_config), execute=False
        ).metrics

        assert metrics.span == 10 * n - 9
        assert metrics.mult_adds == n**3

    def test_execute_false_leaves_output(self, make_matrix):
        """Costing a tree does not run its leaves."""
        x = make_matrix(4, zero=True)
        run_instrumented(mm(x, make_matrix(4), make_matrix(4)), execute=False)
        assert x.to_numpy().sum() == 0

    def test_space_counts_inputs_and_outputs(self, make_matrix, unit_config):
        """Sinf covers X, U, V; the workspace only X."""
        x = make_matrix(2, zero=True)
        metrics = run_instrumented(mm(x, make_matrix(2), make_matrix(2), unit_config)).metrics

        assert metrics.peak_space == 12
        assert metrics.peak_workspace == 4

    @pytest.mark.parametrize("r", [1, 2, 4])
    def test_hybrid_depth_workspace(self, r, make_matrix, unit_config):
        """mm_hd's outputs plus temporaries peak at r n^2."""
        n = 4
        x = make_matrix(n, zero=True)
        tree = mm_hd(x, make_matrix(n), make_matrix(n), r, unit_config)
        metrics = run_instrumented(tree).metrics

        assert metrics.peak_workspace == r * n * n

    def test_alloc_and_free(self, int_ring):
        """Run-time buffers are materialised and released around their use."""
        temp = Matrix.deferred(2, 2, int_ring)
        tree = TaskNode.sequence(
            [TaskNode.alloc(temp.buffer), _leaf(temp, 4), TaskNode.free(temp.buffer)]
        )
        metrics = run_instrumented(tree).metrics

        assert metrics.work == 3 + 4 + 3
        assert metrics.peak_space == 4
        assert not temp.buffer.is_allocated


class TestTraces:
    """Tests for access-trace recording."""

    def test_scalar_product_trace(self, make_matrix, unit_config):
        """One scalar leaf reads U, V, X and writes X, buffers numbered by first use."""
        x = make_matrix(1, zero=True)
        run = run_instrumented(
            mm(x, make_matrix(1), make_matrix(1), unit_config), record_trace=True
        )
        trace = run.trace

        assert trace.dtype == TRACE_DTYPE
        assert trace["buffer"].tolist() == [0, 1, 2, 2]
        assert trace["rw"].tolist() == [READ, READ, READ, WRITE]

    def test_no_trace_unless_requested(self, make_matrix):
        """The trace is only collected on request."""
        x = make_matrix(2, zero=True)
        assert run_instrumented(mm(x, make_matrix(2), make_matrix(2))).trace is None

    def test_trace_length(self, make_matrix):
        """A serial product of side n emits 4 n^3 accesses."""
        x = make_matrix(4, zero=True)
        run = run_instrumented(mm(x, make_matrix(4), make_matrix(4)), record_trace=True)
        assert run.trace.size == 4 * 64

    def test_normalize_buffer_ids(self):
        """Buffers are renumbered densely in order of first access."""
        trace = np.zeros(3, dtype=TRACE_DTYPE)
        trace["buffer"] = [17, 5, 17]
        assert normalize_buffer_ids(trace)["buffer"].tolist() == [0, 1, 0]


class TestCollectLeaves:
    """Tests for leaf inspection."""

    def test_leaf_shapes(self, make_matrix):
        """Leaves carry their subproblem shape."""
        x = make_matrix(16, zero=True)
        leaves = collect_leaves(mm(x, make_matrix(16), make_matrix(16)), "mm_loop")

        assert len(leaves) == 8
        assert {leaf.shape for leaf in leaves} == {(8, 8, 8)}
