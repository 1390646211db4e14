"""Rectangular matrix multiplication by largest-dimension halving.

X (a x c) <- X + U (a x b) V (b x c). Splitting a or c forks two
independent halves; splitting b runs them one after the other, or, in the
plane variant, in parallel into disjoint plane ranges.
"""

import logging
from typing import Optional

from hybridkernels.domain.errors import InvalidPlaneCountError, ShapeError
from hybridkernels.domain.tensors import Matrix, PlaneSet, is_power_of_two
from hybridkernels.engine.tasks import TaskNode
from hybridkernels.kernels.config import DEFAULT_CONFIG, FaultInjection, KernelConfig
from hybridkernels.kernels.leaves import MatMulLeaf
from hybridkernels.kernels.reduce import mm_reduce_r

logger = logging.getLogger(__name__)


def _check_rect(x: Matrix, u: Matrix, v: Matrix) -> tuple[int, int, int]:
    a, b = u.shape
    c = v.cols
    if v.rows != b or x.shape != (a, c):
        raise ShapeError(
            "Operands do not chain", f"X {x.shape}, U {u.shape}, V {v.shape}"
        )
    return a, b, c


def _rmm(
    x: Matrix,
    u: Matrix,
    v: Matrix,
    config: KernelConfig,
    plane_range: Optional[tuple[int, int]] = None,
) -> TaskNode:
    a, b = u.shape
    c = v.cols
    if max(a, b, c) <= config.base:
        return TaskNode.leaf(
            MatMulLeaf(x, u, v),
            work=a * b * c,
            mult_adds=a * b * c,
            label="rmm_loop",
            shape=(a, b, c),
            plane_range=plane_range,
        )
    if a >= max(b, c):
        split = TaskNode.fork(
            [_rmm(x.top(), u.top(), v, config), _rmm(x.bottom(), u.bottom(), v, config)],
            label="split_a",
        )
        children = [split]
    elif b >= max(a, c):
        children = [
            _rmm(x, u.left(), v.top(), config),
            _rmm(x, u.right(), v.bottom(), config),
        ]
    else:
        split = TaskNode.fork(
            [_rmm(x.left(), u, v.left(), config), _rmm(x.right(), u, v.right(), config)],
            label="split_c",
        )
        children = [split]
    return TaskNode.sequence(
        children, overhead=1, label="rmm", plane_range=plane_range, shape=(a, b, c)
    )


def rmm(x: Matrix, u: Matrix, v: Matrix, config: KernelConfig = DEFAULT_CONFIG) -> TaskNode:
    """Build X <- X + U V for power-of-two a, b, c.

    The largest dimension is halved (ties prefer a, then b). Leaves handle
    max(a, b, c) <= base serially.

    Raises:
        ShapeError: If the inner dimensions do not match
    """
    _check_rect(x, u, v)
    return _rmm(x, u, v, config)


def _rmm_opt(
    planes: PlaneSet[Matrix], u: Matrix, v: Matrix, config: KernelConfig
) -> TaskNode:
    a, b = u.shape
    c = v.cols
    if planes.r == 1:
        return _rmm(planes.first, u, v, config, plane_range=(planes.lo, planes.hi))
    if a >= max(b, c):
        children = [
            _rmm_opt(planes.top(), u.top(), v, config),
            _rmm_opt(planes.bottom(), u.bottom(), v, config),
        ]
        label = "split_a"
    elif b > max(a, c):
        low, high = planes.halves()
        if config.fault is FaultInjection.OVERLAP_PLANES:
            high = low
        children = [
            _rmm_opt(low, u.left(), v.top(), config),
            _rmm_opt(high, u.right(), v.bottom(), config),
        ]
        label = "split_b"
    else:
        children = [
            _rmm_opt(planes.left(), u, v.left(), config),
            _rmm_opt(planes.right(), u, v.right(), config),
        ]
        label = "split_c"
    return TaskNode.sequence(
        [TaskNode.fork(children, label=label)],
        overhead=1,
        label="rmm_opt'",
        plane_range=(planes.lo, planes.hi),
        shape=(a, b, c),
    )


def rmm_opt(
    planes: PlaneSet[Matrix], u: Matrix, v: Matrix, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """Build plane 0 <- U V with r zeroed a x c planes.

    While more than one plane remains, a split of b (only when b is strictly
    the largest) forks both halves into disjoint plane ranges. With r planes
    the single-plane subproblems have b' = b / r, a' = min(a, b') and
    c' = min(c, b').

    Raises:
        InvalidPlaneCountError: If r is not a power of two in [1, b]
    """
    a, b, c = _check_rect(planes.first, u, v)
    r = planes.r
    if not is_power_of_two(r) or r > b:
        raise InvalidPlaneCountError(
            "Plane count must be a power of two in [1, b]", f"r={r}, b={b}"
        )
    logger.debug("rmm_opt a=%d b=%d c=%d r=%d", a, b, c, r)
    return TaskNode.sequence(
        [_rmm_opt(planes, u, v, config), mm_reduce_r(planes, a, c, config)],
        overhead=1,
        label="rmm_opt",
        plane_range=(planes.lo, planes.hi),
    )
