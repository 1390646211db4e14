"""Tests for tensor transposition and flattening."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hybridkernels.domain.errors import ShapeError
from hybridkernels.domain.models import RankVector
from hybridkernels.domain.ring import ModularRing
from hybridkernels.domain.tensors import Matrix, Tensor
from hybridkernels.engine.instrumented import run_instrumented
from hybridkernels.engine.races import check_race_freedom
from hybridkernels.kernels.config import KernelConfig
from hybridkernels.kernels.transforms import FlatteningOrder, group_index, td, tf, tt

SCALAR_LEAVES = KernelConfig(tc_base_footprint=3)
RING = ModularRing()


def _random_tensor(order, side, seed):
    rng = np.random.default_rng(seed)
    return Tensor.from_array(RING.random(rng, (side,) * order), RING)


class TestGroupIndex:
    """Tests for index-group flattening."""

    def test_morton_interleaves_most_significant_first(self):
        """(1, 1) at side 4 is 0b0011 in Morton order, 5 in row-major order."""
        coords = [np.array(1), np.array(1)]

        assert int(group_index(coords, 4, FlatteningOrder.MORTON)) == 3
        assert int(group_index(coords, 4, FlatteningOrder.ROW_MAJOR)) == 5

    def test_first_axis_is_high_bit(self):
        """Within a level the first axis contributes the higher bit."""
        assert int(group_index([np.array(2), np.array(0)], 4)) == 8
        assert int(group_index([np.array(0), np.array(2)], 4)) == 4

    @pytest.mark.parametrize("order", list(FlatteningOrder))
    def test_bijection(self, order):
        """Every group position maps to a distinct index in [0, n^s)."""
        grid = np.indices((4, 4, 4))
        flat = group_index(list(grid), 4, order).reshape(-1)
        assert sorted(flat.tolist()) == list(range(64))

    def test_empty_group(self):
        """An empty group flattens to index 0."""
        assert int(group_index([], 4)) == 0


class TestTranspose:
    """Tests for tt."""

    def test_five_axis_rank_vector(self, make_tensor, int_ring):
        """tt matches numpy transpose for rv = [2, 1, 5, 4, 3]."""
        rv = RankVector.create([2, 1, 5, 4, 3])
        source = make_tensor(5, 2)
        target = Tensor.create(5, 2, int_ring)
        run_instrumented(tt(target, source, rv, SCALAR_LEAVES))

        assert np.array_equal(target.to_numpy(), np.transpose(source.to_numpy(), rv.numpy_axes()))

    def test_orthant_routing(self, make_tensor, int_ring):
        """Output orthant 11221 is copied from input orthant 11122."""
        rv = RankVector.create([2, 1, 5, 4, 3])
        source = make_tensor(5, 4)
        target = Tensor.create(5, 4, int_ring)
        run_instrumented(tt(target, source, rv, SCALAR_LEAVES))

        moved = np.transpose(source.orthant((1, 1, 1, 2, 2)).to_numpy(), rv.numpy_axes())
        assert np.array_equal(target.orthant((1, 1, 2, 2, 1)).to_numpy(), moved)

    @settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.data())
    def test_inverse_restores(self, data):
        """tt by rv then by its inverse returns the input."""
        d = data.draw(st.integers(min_value=1, max_value=4))
        side = data.draw(st.sampled_from([1, 2, 4]))
        rv = RankVector.create(data.draw(st.permutations(list(range(1, d + 1)))))
        source = _random_tensor(d, side, data.draw(st.integers(0, 2**16)))
        middle = Tensor.create(d, side, RING)
        back = Tensor.create(d, side, RING)
        run_instrumented(tt(middle, source, rv, SCALAR_LEAVES))
        run_instrumented(tt(back, middle, rv.inverse(), SCALAR_LEAVES))

        assert np.array_equal(back.to_numpy(), source.to_numpy())

    def test_race_free(self, make_tensor, int_ring):
        """Orthant copies write disjoint parts of W."""
        rv = RankVector.create([3, 1, 2])
        tree = tt(Tensor.create(3, 4, int_ring), make_tensor(3, 4), rv, SCALAR_LEAVES)
        assert check_race_freedom(tree).ok

    def test_shape_checked(self, make_tensor, int_ring):
        """W, R and the rank vector must agree on the order."""
        with pytest.raises(ShapeError):
            tt(Tensor.create(2, 2, int_ring), make_tensor(3, 2), RankVector.identity(3))


class TestFlatten:
    """Tests for tf and td."""

    @pytest.mark.parametrize("order", list(FlatteningOrder))
    def test_layout(self, order, make_tensor, int_ring):
        """M[row(i), col(j)] = T[i, j] under the chosen order."""
        t = make_tensor(3, 4)
        m = Matrix.create(16, 4, int_ring)
        run_instrumented(tf(m, t, 2, 1, SCALAR_LEAVES, order))

        grid = np.indices((4, 4, 4))
        rows = group_index(list(grid[:2]), 4, order)
        cols = group_index(list(grid[2:]), 4, order)
        assert np.array_equal(m.to_numpy()[rows, cols], t.to_numpy())

    def test_row_major_is_one_leaf(self, make_tensor, int_ring):
        """Row-major flattening runs as a single serial move."""
        tree = tf(Matrix.create(4, 4, int_ring), make_tensor(2, 4), 1, 1, SCALAR_LEAVES,
                  FlatteningOrder.ROW_MAJOR)
        assert tree.label == "tf_leaf"

    def test_morton_recurses(self, make_tensor, int_ring):
        """Morton flattening forks over orthants down to the leaf size."""
        tree = tf(Matrix.create(4, 4, int_ring), make_tensor(2, 4), 1, 1, SCALAR_LEAVES)

        assert tree.label == "tf"
        assert check_race_freedom(tree).ok
        assert len(list(tree.leaves())) == 16
        assert len(tree.find("tf_fork")) == 5

    @settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(
        st.integers(min_value=2, max_value=4),
        st.sampled_from([2, 4]),
        st.sampled_from(list(FlatteningOrder)),
        st.data(),
    )
    def test_unflatten_inverts_flatten(self, order_count, side, layout, data):
        """td after tf restores the tensor for any split of the axes."""
        rows = data.draw(st.integers(min_value=0, max_value=order_count))
        source = _random_tensor(order_count, side, data.draw(st.integers(0, 2**16)))
        flat = Matrix.create(side**rows, side ** (order_count - rows), RING)
        restored = Tensor.create(order_count, side, RING)
        run_instrumented(tf(flat, source, rows, order_count - rows, SCALAR_LEAVES, layout))
        run_instrumented(td(restored, flat, rows, order_count - rows, SCALAR_LEAVES, layout))

        assert np.array_equal(restored.to_numpy(), source.to_numpy())

    def test_shape_checked(self, make_tensor, int_ring):
        """The matrix must be n^s' x n^s''."""
        with pytest.raises(ShapeError):
            tf(Matrix.create(4, 4, int_ring), make_tensor(3, 2), 1, 2)
