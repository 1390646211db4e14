"""Tensor contraction X{i,j} <- X{i,j} + sum_k U{i,k} V{k,j}.

All tensors are hypercubes of side n; the computation cube has dimension
w = u + v + x. Builders here cover the reference loops, the in-place
orthant recursion, the plane-based hybrid and the transpose/flatten route
through rectangular multiplication.
"""

import itertools
import logging
from collections.abc import Sequence
from typing import Optional

from hybridkernels.domain.errors import InvalidPlaneCountError, RankVectorError, ShapeError
from hybridkernels.domain.models import ContractionSpec
from hybridkernels.domain.tensors import (
    Matrix,
    PlaneSet,
    Tensor,
    is_power_of_two,
    linearize,
    log2_exact,
    selector_tuples,
)
from hybridkernels.engine.tasks import TaskNode
from hybridkernels.kernels.config import DEFAULT_CONFIG, FaultInjection, KernelConfig
from hybridkernels.kernels.leaves import ContractLeaf
from hybridkernels.kernels.reduce import tc_reduce_r
from hybridkernels.kernels.rmm import rmm_opt
from hybridkernels.kernels.transforms import FlatteningOrder, td, tf, tt

logger = logging.getLogger(__name__)


def _check_operands(x: Tensor, u: Tensor, v: Tensor, spec: ContractionSpec) -> int:
    n = x.side
    if x.order != spec.u + spec.v or u.order != spec.u + spec.x or v.order != spec.v + spec.x:
        raise ShapeError(
            "Tensor orders do not match the contraction",
            f"X {x.order}, U {u.order}, V {v.order} for u={spec.u} v={spec.v} x={spec.x}",
        )
    if not (u.side == v.side == n):
        raise ShapeError("Tensors must share one side", f"{x.side}, {u.side}, {v.side}")
    return n


def tc_loop(x: Tensor, u: Tensor, v: Tensor, spec: ContractionSpec) -> None:
    """X <- sum_k U{i,k} V{k,j} by direct nested sums, one output at a time.

    X is overwritten. This is the reference result for every other
    contraction kernel.
    """
    n = _check_operands(x, u, v, spec)
    ring = x.ring
    u_arr, v_arr = u.to_numpy(), v.to_numpy()
    out = x.array()
    i_labels = spec.canonical_x()[: spec.u]
    j_labels = spec.canonical_x()[spec.u :]
    k_labels = spec.canonical_u()[spec.u :]
    for ij in itertools.product(range(n), repeat=spec.u + spec.v):
        value = dict(zip(i_labels + j_labels, ij, strict=True))
        acc = 0
        for k in itertools.product(range(n), repeat=spec.x):
            value.update(zip(k_labels, k, strict=True))
            u_index = tuple(value[label] for label in spec.u_axes)
            v_index = tuple(value[label] for label in spec.v_axes)
            acc = ring.fma(acc, u_arr[u_index], v_arr[v_index])
        out[ij] = acc


def tc_loop_permuted(
    x: Tensor, u: Tensor, v: Tensor, spec: ContractionSpec, loop_order: Sequence[int]
) -> None:
    """X <- X + U V with the w loops nested in ``loop_order``.

    ``loop_order`` lists 1-based positions into ``spec.all_labels()``,
    outermost first. Every order yields the same result.

    Raises:
        RankVectorError: If loop_order is not a permutation of 1..w
    """
    n = _check_operands(x, u, v, spec)
    labels = spec.all_labels()
    if sorted(loop_order) != list(range(1, len(labels) + 1)):
        raise RankVectorError("Loop order is not a permutation", f"got {list(loop_order)}")
    nest = [labels[position - 1] for position in loop_order]
    ring = x.ring
    u_arr, v_arr = u.to_numpy(), v.to_numpy()
    out = x.array()
    for values in itertools.product(range(n), repeat=len(nest)):
        value = dict(zip(nest, values, strict=True))
        ij = tuple(value[label] for label in spec.canonical_x())
        u_index = tuple(value[label] for label in spec.u_axes)
        v_index = tuple(value[label] for label in spec.v_axes)
        out[ij] = ring.fma(out[ij], u_arr[u_index], v_arr[v_index])


def _children_for(
    spec: ContractionSpec, ij: Sequence[int], k: Sequence[int]
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    labels = spec.canonical_x() + spec.canonical_u()[spec.u :]
    choice = dict(zip(labels, tuple(ij) + tuple(k), strict=True))
    return spec.halves_for(spec.u_axes, choice), spec.halves_for(spec.v_axes, choice)


def _contract_leaf(
    x: Tensor,
    u: Tensor,
    v: Tensor,
    spec: ContractionSpec,
    plane_range: Optional[tuple[int, int]] = None,
) -> TaskNode:
    work = x.side**spec.w
    return TaskNode.leaf(
        ContractLeaf(
            x, u, v, spec.u_rank_vector(), spec.v_rank_vector(), (spec.u, spec.v, spec.x)
        ),
        work=work,
        mult_adds=work,
        label="tc_leaf",
        shape=(x.side,) * spec.w,
        plane_range=plane_range,
    )


def _tc(
    x: Tensor,
    u: Tensor,
    v: Tensor,
    spec: ContractionSpec,
    config: KernelConfig,
    plane_range: Optional[tuple[int, int]] = None,
) -> TaskNode:
    n = x.side
    if n == 1 or x.size + u.size + v.size <= config.tc_base_footprint:
        return _contract_leaf(x, u, v, spec, plane_range)
    steps = []
    for k in selector_tuples(spec.x):
        children = []
        for ij in selector_tuples(spec.u + spec.v):
            u_halves, v_halves = _children_for(spec, ij, k)
            children.append(
                _tc(x.orthant(ij), u.orthant(u_halves), v.orthant(v_halves), spec, config)
            )
        steps.append(TaskNode.fork(children, label="tc_step"))
    return TaskNode.sequence(
        steps, overhead=1, label="tc", plane_range=plane_range, shape=(n,) * spec.w
    )


def tc(
    x: Tensor, u: Tensor, v: Tensor, spec: ContractionSpec, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """Build X <- X + U V by orthant recursion in place.

    Each level runs 2^x sequential steps, one per choice of k halves; a
    step forks all 2^(u+v) output orthants.

    Raises:
        ShapeError: If tensor orders or sides do not fit the contraction
    """
    _check_operands(x, u, v, spec)
    return _tc(x, u, v, spec, config)


def _tc_hs(
    planes: PlaneSet[Tensor],
    u: Tensor,
    v: Tensor,
    spec: ContractionSpec,
    config: KernelConfig,
) -> TaskNode:
    if planes.r == 1:
        return _tc(planes.first, u, v, spec, config, plane_range=(planes.lo, planes.hi))
    parts = planes.partitions(2**spec.x)
    if config.fault is FaultInjection.OVERLAP_PLANES:
        parts = [parts[0]] * len(parts)
    children = []
    for ij in selector_tuples(spec.u + spec.v):
        for k in selector_tuples(spec.x):
            u_halves, v_halves = _children_for(spec, ij, k)
            part = parts[linearize(k) - 1]
            children.append(
                _tc_hs(part.orthant(ij), u.orthant(u_halves), v.orthant(v_halves), spec, config)
            )
    side = planes.first.side
    return TaskNode.sequence(
        [TaskNode.fork(children, label="tc_hs_fork")],
        overhead=1,
        label="tc_hs'",
        plane_range=(planes.lo, planes.hi),
        shape=(side,) * spec.w,
    )


def valid_tc_planes(r: int, n: int, x: int) -> bool:
    """r = (2^x)^i for some 0 <= i <= log2 n."""
    if not is_power_of_two(r) or not is_power_of_two(n):
        return False
    exponent = log2_exact(r)
    return exponent % x == 0 and exponent // x <= log2_exact(n)


def tc_hs(
    planes: PlaneSet[Tensor],
    u: Tensor,
    v: Tensor,
    spec: ContractionSpec,
    config: KernelConfig = DEFAULT_CONFIG,
) -> TaskNode:
    """Build plane 0 <- U V using r zeroed planes, then fold them.

    While more than one plane remains, all 2^w subproblems of a level run
    in one fork; those sharing an output orthant write disjoint plane
    partitions chosen by their k halves.

    Raises:
        InvalidPlaneCountError: If r is not a power of 2^x up to n^x
    """
    n = _check_operands(planes.first, u, v, spec)
    if not valid_tc_planes(planes.r, n, spec.x):
        raise InvalidPlaneCountError(
            "Plane count must be (2^x)^i with 0 <= i <= log2 n",
            f"r={planes.r}, n={n}, x={spec.x}",
        )
    return TaskNode.sequence(
        [_tc_hs(planes, u, v, spec, config), tc_reduce_r(planes, n, config)],
        overhead=1,
        label="tc_hs",
        plane_range=(planes.lo, planes.hi),
    )


def tc_mm_opt(
    x: Tensor,
    u: Tensor,
    v: Tensor,
    spec: ContractionSpec,
    r: int,
    config: KernelConfig = DEFAULT_CONFIG,
    order: FlatteningOrder = FlatteningOrder.MORTON,
) -> TaskNode:
    """Build X <- U V through transposition, flattening and rmm_opt.

    U and V are transposed into (i.., k..) and (k.., j..) layouts, flattened
    to n^u x n^x and n^x x n^v matrices, multiplied with r planes and the
    result unflattened into X. All intermediates are allocated and freed
    inside the tree. X is overwritten.

    Raises:
        InvalidPlaneCountError: If r is not a power of two in [1, n^x]
    """
    n = _check_operands(x, u, v, spec)
    inner = n**spec.x
    if not is_power_of_two(r) or r > inner:
        raise InvalidPlaneCountError(
            "Plane count must be a power of two in [1, n^x]", f"r={r}, n^x={inner}"
        )
    ring = x.ring
    u_t = Tensor.deferred(spec.u + spec.x, n, ring)
    v_t = Tensor.deferred(spec.x + spec.v, n, ring)
    a = Matrix.deferred(n**spec.u, inner, ring)
    b = Matrix.deferred(inner, n**spec.v, ring)
    c = PlaneSet.deferred_matrices(r, n**spec.u, n**spec.v, ring)
    u_ranks, v_ranks = spec.u_rank_vector(), spec.v_rank_vector()
    logger.debug("tc_mm_opt n=%d u=%d v=%d x=%d r=%d", n, spec.u, spec.v, spec.x, r)
    return TaskNode.sequence(
        [
            TaskNode.alloc(u_t.buffer, label="alloc_u_t"),
            TaskNode.alloc(v_t.buffer, label="alloc_v_t"),
            TaskNode.fork(
                [tt(u_t, u, u_ranks, config), tt(v_t, v, v_ranks, config)], label="transpose"
            ),
            TaskNode.alloc(a.buffer, label="alloc_a"),
            TaskNode.alloc(b.buffer, label="alloc_b"),
            TaskNode.fork(
                [
                    tf(a, u_t, spec.u, spec.x, config, order),
                    tf(b, v_t, spec.x, spec.v, config, order),
                ],
                label="flatten",
            ),
            TaskNode.free(u_t.buffer, label="free_u_t"),
            TaskNode.free(v_t.buffer, label="free_v_t"),
            TaskNode.alloc(c.first.buffer, label="alloc_c"),
            rmm_opt(c, a, b, config),
            TaskNode.free(a.buffer, label="free_a"),
            TaskNode.free(b.buffer, label="free_b"),
            td(x, c.first, spec.u, spec.v, config, order),
            TaskNode.free(c.first.buffer, label="free_c"),
        ],
        overhead=1,
        label="tc_mm_opt",
    )
