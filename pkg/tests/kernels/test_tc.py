"""Tests for tensor contraction kernels."""

import numpy as np
import pytest

from hybridkernels.domain.errors import InvalidPlaneCountError, RankVectorError, ShapeError
from hybridkernels.domain.models import ContractionSpec
from hybridkernels.domain.tensors import PlaneSet, Tensor
from hybridkernels.engine.instrumented import run_instrumented
from hybridkernels.engine.races import check_race_freedom
from hybridkernels.kernels.config import FaultInjection, KernelConfig
from hybridkernels.kernels.tc import (
    tc,
    tc_hs,
    tc_loop,
    tc_loop_permuted,
    tc_mm_opt,
    valid_tc_planes,
)
from hybridkernels.kernels.transforms import FlatteningOrder

GROUPS = [(1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 2, 2)]
LEAF_ALL = KernelConfig(base=1, tc_base_footprint=3)


def _config(n):
    """Recurse to scalars at n = 2; stop a level earlier at n = 4."""
    return LEAF_ALL if n == 2 else KernelConfig(base=2, tc_base_footprint=64)


def _powers(limit):
    return [1 << e for e in range(limit.bit_length()) if 1 << e <= limit]


def _operands(spec, n, make_tensor):
    return make_tensor(spec.u + spec.x, n), make_tensor(spec.v + spec.x, n)


def _expected(spec, u, v, int_ring):
    out = Tensor.create(spec.u + spec.v, u.side, int_ring)
    tc_loop(out, u, v, spec)
    return out.to_numpy()


def _einsum_reference(spec, u, v):
    letters = {label: chr(ord("a") + i) for i, label in enumerate(spec.all_labels())}
    u_sub = "".join(letters[label] for label in spec.u_axes)
    v_sub = "".join(letters[label] for label in spec.v_axes)
    x_sub = "".join(letters[label] for label in spec.canonical_x())
    product = np.einsum(
        f"{u_sub},{v_sub}->{x_sub}", u.to_numpy().astype(object), v.to_numpy().astype(object)
    )
    return product


class TestTCLoop:
    """Tests for the reference loops."""

    @pytest.mark.parametrize("groups", GROUPS)
    def test_matches_einsum(self, groups, make_tensor, int_ring):
        """The nested sums equal an exact einsum modulo p."""
        spec = ContractionSpec(*groups)
        u, v = _operands(spec, 2, make_tensor)
        reference = _einsum_reference(spec, u, v) % int_ring.modulus

        assert np.array_equal(_expected(spec, u, v, int_ring), reference.astype(np.int64))

    def test_permuted_operand_layout(self, make_tensor, int_ring):
        """Operands listing their axes out of canonical order."""
        spec = ContractionSpec.create(2, 1, 1, "k1,i2,i1", "j1,k1")
        u, v = _operands(spec, 2, make_tensor)
        reference = _einsum_reference(spec, u, v) % int_ring.modulus

        assert np.array_equal(_expected(spec, u, v, int_ring), reference.astype(np.int64))

    @pytest.mark.parametrize("groups", [(2, 1, 1), (1, 1, 2), (1, 2, 1)])
    def test_loop_reordering_invariance(self, groups, make_tensor, int_ring, rng):
        """25 random loop nestings of a w = 4 contraction give the same X."""
        spec = ContractionSpec(*groups)
        u, v = _operands(spec, 2, make_tensor)
        expected = _expected(spec, u, v, int_ring)
        for _ in range(25):
            order = (rng.permutation(spec.w) + 1).tolist()
            out = Tensor.create(spec.u + spec.v, 2, int_ring)
            tc_loop_permuted(out, u, v, spec, order)
            assert np.array_equal(out.to_numpy(), expected), f"order {order}"

    def test_loop_order_must_be_permutation(self, make_tensor, int_ring):
        """Loop orders are permutations of 1..w."""
        spec = ContractionSpec(1, 1, 1)
        u, v = _operands(spec, 2, make_tensor)
        out = Tensor.create(2, 2, int_ring)
        with pytest.raises(RankVectorError):
            tc_loop_permuted(out, u, v, spec, [1, 1, 2])

    def test_order_mismatch(self, make_tensor, int_ring):
        """Tensor orders must fit the groups."""
        spec = ContractionSpec(1, 1, 1)
        with pytest.raises(ShapeError):
            tc_loop(Tensor.create(3, 2, int_ring), make_tensor(2, 2), make_tensor(2, 2), spec)


class TestTC:
    """Tests for the in-place orthant recursion."""

    @pytest.mark.parametrize("groups", GROUPS)
    @pytest.mark.parametrize("n", [2, 4])
    def test_oracle(self, groups, n, make_tensor, int_ring):
        """X = sum_k U V bit-exactly with n^w multiply-adds."""
        spec = ContractionSpec(*groups)
        u, v = _operands(spec, n, make_tensor)
        out = Tensor.create(spec.u + spec.v, n, int_ring)
        tree = tc(out, u, v, spec, _config(n))
        assert check_race_freedom(tree).ok
        run = run_instrumented(tree)

        assert np.array_equal(out.to_numpy(), _expected(spec, u, v, int_ring))
        assert run.metrics.mult_adds == n**spec.w

    def test_level_structure(self, make_tensor, int_ring):
        """A level runs 2^x steps, each forking 2^(u+v) orthants."""
        spec = ContractionSpec(1, 1, 2)
        u, v = _operands(spec, 2, make_tensor)
        tree = tc(Tensor.create(2, 2, int_ring), u, v, spec, LEAF_ALL)

        assert tree.label == "tc"
        assert [child.label for child in tree.children] == ["tc_step"] * 4
        assert all(len(step.children) == 4 for step in tree.children)

    def test_small_problem_is_one_leaf(self, make_tensor, int_ring):
        """Footprints under the threshold run serially."""
        spec = ContractionSpec(1, 1, 1)
        u, v = _operands(spec, 4, make_tensor)
        tree = tc(Tensor.create(2, 4, int_ring), u, v, spec)
        assert tree.label == "tc_leaf"

    def test_permuted_layout(self, make_tensor, int_ring):
        """Recursion follows the declared operand axes."""
        spec = ContractionSpec.create(2, 2, 2, "i1,k1,i2,k2", "k2,j1,k1,j2")
        u, v = _operands(spec, 2, make_tensor)
        out = Tensor.create(4, 2, int_ring)
        run_instrumented(tc(out, u, v, spec, LEAF_ALL))

        assert np.array_equal(out.to_numpy(), _expected(spec, u, v, int_ring))


class TestTCHybrid:
    """Tests for the plane-based contraction."""

    def test_valid_plane_counts(self):
        """r = (2^x)^i with i <= log2 n."""
        assert valid_tc_planes(1, 4, 2)
        assert valid_tc_planes(4, 4, 2)
        assert valid_tc_planes(16, 4, 2)
        assert not valid_tc_planes(2, 4, 2)
        assert not valid_tc_planes(64, 4, 2)

    @pytest.mark.parametrize("groups", GROUPS)
    @pytest.mark.parametrize("n", [2, 4])
    def test_oracle(self, groups, n, make_tensor, int_ring):
        """Plane 0 holds the contraction for every legal r."""
        spec = ContractionSpec(*groups)
        u, v = _operands(spec, n, make_tensor)
        expected = _expected(spec, u, v, int_ring)
        for r in (r for r in _powers(n**spec.x) if valid_tc_planes(r, n, spec.x)):
            planes = PlaneSet.tensors(r, spec.u + spec.v, n, int_ring)
            tree = tc_hs(planes, u, v, spec, _config(n))
            assert check_race_freedom(tree).ok
            run = run_instrumented(tree)

            assert np.array_equal(planes.first.to_numpy(), expected), f"r={r}"
            assert run.metrics.mult_adds == n**spec.w

    def test_invalid_plane_count(self, make_tensor, int_ring):
        """Plane counts must be powers of 2^x."""
        spec = ContractionSpec(1, 1, 2)
        u, v = _operands(spec, 4, make_tensor)
        with pytest.raises(InvalidPlaneCountError):
            tc_hs(PlaneSet.tensors(2, 2, 4, int_ring), u, v, spec)

    def test_fault_detected(self, make_tensor, int_ring):
        """Sharing one partition among k choices races."""
        spec = ContractionSpec(1, 1, 1)
        u, v = _operands(spec, 2, make_tensor)
        config = LEAF_ALL.with_updates(fault=FaultInjection.OVERLAP_PLANES)
        tree = tc_hs(PlaneSet.tensors(2, 2, 2, int_ring), u, v, spec, config)

        assert not check_race_freedom(tree).ok


class TestTCThroughMatrixProduct:
    """Tests for the transpose/flatten/multiply route."""

    @pytest.mark.parametrize("groups", GROUPS)
    @pytest.mark.parametrize("n", [2, 4])
    @pytest.mark.parametrize("order", list(FlatteningOrder))
    def test_oracle(self, groups, n, order, make_tensor, int_ring):
        """X equals the reference for every plane count up to n^x."""
        spec = ContractionSpec(*groups)
        u, v = _operands(spec, n, make_tensor)
        expected = _expected(spec, u, v, int_ring)
        for r in _powers(n**spec.x):
            out = Tensor.create(spec.u + spec.v, n, int_ring)
            tree = tc_mm_opt(out, u, v, spec, r, _config(n), order)
            assert check_race_freedom(tree).ok
            run = run_instrumented(tree)

            assert np.array_equal(out.to_numpy(), expected), f"r={r}"
            assert run.metrics.mult_adds == n**spec.w

    def test_permuted_layout(self, make_tensor, int_ring):
        """Transposition handles non-canonical operand layouts."""
        spec = ContractionSpec.create(2, 1, 1, "k1,i2,i1", "j1,k1")
        u, v = _operands(spec, 4, make_tensor)
        out = Tensor.create(3, 4, int_ring)
        run_instrumented(tc_mm_opt(out, u, v, spec, 2))

        assert np.array_equal(out.to_numpy(), _expected(spec, u, v, int_ring))

    def test_intermediates_are_freed(self, make_tensor, int_ring):
        """Every run-time buffer is released by the end of the tree."""
        spec = ContractionSpec(1, 1, 1)
        u, v = _operands(spec, 4, make_tensor)
        tree = tc_mm_opt(Tensor.create(2, 4, int_ring), u, v, spec, 2)
        run_instrumented(tree)
        allocs = [node.buffer for node in tree.walk() if node.label.startswith("alloc")]

        assert len(allocs) == 5
        assert not any(buffer.is_allocated for buffer in allocs)

    def test_plane_count_limit(self, make_tensor, int_ring):
        """r may not exceed n^x."""
        spec = ContractionSpec(1, 1, 1)
        u, v = _operands(spec, 2, make_tensor)
        with pytest.raises(InvalidPlaneCountError):
            tc_mm_opt(Tensor.create(2, 2, int_ring), u, v, spec, 4)
