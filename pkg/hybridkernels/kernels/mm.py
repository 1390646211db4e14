"""Square matrix multiplication: the serial loop, classic 8-way recursion,
the hybrid-depth variant with temporaries, the plane-based space/span
trade-off and the dispatcher choosing among them.

Every builder returns a TaskNode tree; nothing runs until the tree is
handed to an executor.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from hybridkernels.domain.errors import InvalidPlaneCountError, ShapeError
from hybridkernels.domain.tensors import Matrix, PlaneSet, is_power_of_two
from hybridkernels.engine.tasks import TaskNode
from hybridkernels.kernels.config import DEFAULT_CONFIG, FaultInjection, KernelConfig
from hybridkernels.kernels.leaves import MatMulLeaf
from hybridkernels.kernels.reduce import mm_reduce2, mm_reduce_r

logger = logging.getLogger(__name__)

# Quadrant triples (X, U, V) of the two rounds; within a round all four
# products write distinct quadrants of X.
ROUND_ONE = (("11", "11", "11"), ("12", "11", "12"), ("21", "21", "11"), ("22", "21", "12"))
ROUND_TWO = (("11", "12", "21"), ("12", "12", "22"), ("21", "22", "21"), ("22", "22", "22"))


def _check_square(x: Matrix, u: Matrix, v: Matrix) -> int:
    n = x.rows
    if not (x.shape == u.shape == v.shape == (n, n)):
        raise ShapeError(
            "Operands must be square and of equal side",
            f"X {x.shape}, U {u.shape}, V {v.shape}",
        )
    return n


def _check_planes(r: int, n: int) -> None:
    if not is_power_of_two(r) or r > n:
        raise InvalidPlaneCountError(
            "Plane count must be a power of two in [1, n]", f"r={r}, n={n}"
        )


def mm_loop(x: Matrix, u: Matrix, v: Matrix) -> None:
    """X <- X + U V with a plain serial i, j, k loop on scalars.

    Slow but independent of the vectorised leaves, so it serves as the
    reference product.
    """
    _check_square(x, u, v)
    ring = x.ring
    xs = x.to_numpy().tolist()
    us = u.to_numpy().tolist()
    vs = v.to_numpy().tolist()
    n = x.rows
    for i in range(n):
        row = xs[i]
        for j in range(n):
            acc = row[j]
            for k in range(n):
                acc = ring.fma(acc, us[i][k], vs[k][j])
            row[j] = acc
    x.array()[...] = xs


def _mm(
    x: Matrix,
    u: Matrix,
    v: Matrix,
    config: KernelConfig,
    plane_range: Optional[tuple[int, int]] = None,
) -> TaskNode:
    n = x.rows
    if n <= config.base:
        return TaskNode.leaf(
            MatMulLeaf(x, u, v),
            work=n**3,
            mult_adds=n**3,
            label="mm_loop",
            shape=(n, n, n),
            plane_range=plane_range,
        )
    rounds = [
        TaskNode.fork(
            [_mm(x.quadrant(qx), u.quadrant(qu), v.quadrant(qv), config) for qx, qu, qv in triples],
            label="mm_round",
        )
        for triples in (ROUND_ONE, ROUND_TWO)
    ]
    return TaskNode.sequence(
        rounds, overhead=1, label="mm", plane_range=plane_range, shape=(n, n, n)
    )


def mm(x: Matrix, u: Matrix, v: Matrix, config: KernelConfig = DEFAULT_CONFIG) -> TaskNode:
    """Build X <- X + U V by 8-way recursion in two rounds of four.

    Args:
        x: Output, accumulated into
        u: Left operand
        v: Right operand
        config: Base threshold for the serial leaf

    Returns:
        Task tree with span Theta(n) and no temporaries

    Raises:
        ShapeError: If the operands are not square of equal side
    """
    _check_square(x, u, v)
    return _mm(x, u, v, config)


def _mm_hd(
    x: Matrix, u: Matrix, v: Matrix, lo: int, hi: int, config: KernelConfig
) -> TaskNode:
    r = hi - lo + 1
    if r == 1:
        return _mm(x, u, v, config)
    mid = (lo + hi) // 2
    n = x.rows
    y = Matrix.deferred(n, n, x.ring)
    children = [
        _mm_hd(x.quadrant(qx), u.quadrant(qu), v.quadrant(qv), lo, mid, config)
        for qx, qu, qv in ROUND_ONE
    ] + [
        _mm_hd(y.quadrant(qx), u.quadrant(qu), v.quadrant(qv), mid + 1, hi, config)
        for qx, qu, qv in ROUND_TWO
    ]
    return TaskNode.sequence(
        [
            TaskNode.alloc(y.buffer, label="alloc_y"),
            TaskNode.fork(children, label="mm_hd_fork"),
            mm_reduce2(x, y, config),
            TaskNode.free(y.buffer, label="free_y"),
        ],
        overhead=1,
        label="mm_hd'",
        plane_range=(lo, hi),
        shape=(n, n, n),
    )


def mm_hd(
    x: Matrix, u: Matrix, v: Matrix, r: int, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """Build X <- U V, spending up to r n^2 temporary space to cut the span.

    X is zeroed now, at build time, as untimed setup: no node of the tree
    performs the zeroing, so the measured costs and traces leave it out, the same
    as for the pre-zeroed planes handed to ``mm_opt``. Each recursive level
    whose budget exceeds one sends the second round into a fresh temporary
    and adds it back afterwards; once the budget reaches one the classic
    recursion takes over. With r = 1 the tree is exactly that of ``mm``.

    Raises:
        InvalidPlaneCountError: If r is not a power of two in [1, n]
    """
    n = _check_square(x, u, v)
    _check_planes(r, n)
    x.array()[...] = 0
    return _mm_hd(x, u, v, 0, r - 1, config)


def mm_nd(x: Matrix, u: Matrix, v: Matrix, config: KernelConfig = DEFAULT_CONFIG) -> TaskNode:
    """No-dependency variant: mm_hd with the full budget r = n."""
    return mm_hd(x, u, v, x.rows, config)


def _mm_opt(
    planes: PlaneSet[Matrix], u: Matrix, v: Matrix, config: KernelConfig
) -> TaskNode:
    n = u.rows
    if planes.r == 1:
        return _mm(planes.first, u, v, config, plane_range=(planes.lo, planes.hi))
    low, high = planes.halves()
    if config.fault is FaultInjection.OVERLAP_PLANES:
        high = low
    children = [
        _mm_opt(low.quadrant(qx), u.quadrant(qu), v.quadrant(qv), config)
        for qx, qu, qv in ROUND_ONE
    ] + [
        _mm_opt(high.quadrant(qx), u.quadrant(qu), v.quadrant(qv), config)
        for qx, qu, qv in ROUND_TWO
    ]
    return TaskNode.sequence(
        [TaskNode.fork(children, label="mm_opt_fork")],
        overhead=1,
        label="mm_opt'",
        plane_range=(planes.lo, planes.hi),
        shape=(n, n, n),
    )


def mm_opt(
    planes: PlaneSet[Matrix], u: Matrix, v: Matrix, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """Build plane 0 <- U V using r pre-allocated, zeroed planes.

    The recursion sends the two rounds into disjoint halves of the plane
    range until a single plane remains, then a blocked reduction folds
    every plane into plane 0.

    Raises:
        InvalidPlaneCountError: If r is not a power of two in [1, n]
        ShapeError: If planes, U and V are not all n x n
    """
    n = _check_square(planes.first, u, v)
    _check_planes(planes.r, n)
    return TaskNode.sequence(
        [_mm_opt(planes, u, v, config), mm_reduce_r(planes, n, n, config)],
        overhead=1,
        label="mm_opt",
        plane_range=(planes.lo, planes.hi),
    )


def mm_ns(
    planes: PlaneSet[Matrix], u: Matrix, v: Matrix, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """No-sequencing variant: mm_opt with exactly n planes."""
    if planes.r != u.rows:
        raise InvalidPlaneCountError(
            "The no-sequencing variant needs exactly n planes", f"r={planes.r}, n={u.rows}"
        )
    return mm_opt(planes, u, v, config)


@dataclass(frozen=True, slots=True)
class DispatchDecision:
    """Plane count chosen for a processor count."""

    processors: int
    n: int
    requested: int  # ceil(p / n^2) before rounding and clamping
    r: int
    rounded: bool
    clamped: bool

    @property
    def algorithm(self) -> str:
        return "mm" if self.r == 1 else "mm_opt"

    def describe(self) -> str:
        flags = [flag for flag, on in (("rounded", self.rounded), ("clamped", self.clamped)) if on]
        suffix = f" ({', '.join(flags)} from {self.requested})" if flags else ""
        return f"p={self.processors}, n={self.n}: {self.algorithm} with r={self.r}{suffix}"


def dispatch_planes(n: int, processors: int) -> DispatchDecision:
    """Pick r for p processors on an n x n product.

    p <= n^2 keeps the classic recursion (r = 1). Above that the band gives
    r = ceil(p / n^2), rounded down to a power of two and clamped to n.
    """
    if processors < 1:
        raise ValueError(f"processor count must be positive, got {processors}")
    if not is_power_of_two(n):
        raise ShapeError("Side must be a power of two", f"got {n}")
    if processors <= n * n:
        return DispatchDecision(processors, n, 1, 1, rounded=False, clamped=False)
    requested = -(-processors // (n * n))
    r = 1 << (requested.bit_length() - 1)
    rounded = r != requested
    clamped = r > n
    return DispatchDecision(processors, n, requested, min(r, n), rounded, clamped)


def mm_tradeoff(
    planes: PlaneSet[Matrix],
    u: Matrix,
    v: Matrix,
    processors: int,
    config: KernelConfig = DEFAULT_CONFIG,
) -> TaskNode:
    """Build plane 0 <- U V with the plane count suited to ``processors``.

    Only the first r planes of the set are used; they must be zeroed.

    Raises:
        InvalidPlaneCountError: If fewer than r planes were supplied
    """
    n = _check_square(planes.first, u, v)
    decision = dispatch_planes(n, processors)
    logger.info("Dispatch: %s", decision.describe())
    if planes.r < decision.r:
        raise InvalidPlaneCountError(
            "Not enough planes for the chosen trade-off", f"need {decision.r}, have {planes.r}"
        )
    if decision.r == 1:
        return mm(planes.first, u, v, config)
    return mm_opt(planes.select(planes.lo, planes.lo + decision.r - 1), u, v, config)
