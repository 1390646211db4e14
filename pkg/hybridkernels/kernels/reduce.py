"""Blocked parallel reductions: two-operand add and r-plane fold.

Both walk rows with a parallel-for, split each row into blocks of B
elements with a second parallel-for and finish every block serially.
"""

import logging

from hybridkernels.domain.errors import ShapeError
from hybridkernels.domain.tensors import Matrix, PlaneSet, Tensor, log2_exact
from hybridkernels.engine.instrumented import ceil_log2
from hybridkernels.engine.tasks import TaskNode
from hybridkernels.kernels.config import DEFAULT_CONFIG, KernelConfig
from hybridkernels.kernels.leaves import AddLeaf, ReduceLeaf

logger = logging.getLogger(__name__)


def mm_reduce2(x: Matrix, y: Matrix, config: KernelConfig = DEFAULT_CONFIG) -> TaskNode:
    """Build X <- X + Y elementwise.

    Span is ceil(log2 rows) + ceil(log2 blocks per row) + block length.

    Raises:
        ShapeError: If the shapes differ
    """
    if x.shape != y.shape:
        raise ShapeError("Reduce operands differ in shape", f"{x.shape} vs {y.shape}")
    width = config.block_size
    rows = []
    for i in range(x.rows):
        pairs = zip(x.row(i).segments(width), y.row(i).segments(width), strict=True)
        blocks = [
            TaskNode.leaf(AddLeaf(xs, ys), work=xs.cols, label="add_block") for xs, ys in pairs
        ]
        rows.append(TaskNode.parallel_for(blocks, label="reduce2_blocks"))
    return TaskNode.parallel_for(rows, label="mm_reduce2")


def mm_reduce_r(
    planes: PlaneSet[Matrix], rows: int, cols: int, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """Build plane 0 <- sum of all planes in the set.

    A single plane is a no-op. Each block folds r segments serially, so its
    work is B r while its span is B + ceil(log2 r).

    Raises:
        ShapeError: If the planes are not rows x cols
    """
    if planes.shape != (rows, cols):
        raise ShapeError(
            "Planes do not match the reduce shape", f"{planes.shape} vs {(rows, cols)}"
        )
    r = planes.r
    if r == 1:
        return TaskNode.sequence(label="reduce_r")
    log2_exact(r)
    fold = ceil_log2(r)
    row_tasks = []
    for i in range(rows):
        per_plane = [list(plane.row(i).segments(config.block_size)) for plane in planes.planes]
        blocks = []
        for segments in zip(*per_plane, strict=True):
            width = segments[0].cols
            blocks.append(
                TaskNode.leaf(
                    ReduceLeaf(tuple(segments)),
                    work=width * r,
                    span=width + fold,
                    label="reduce_block",
                )
            )
        row_tasks.append(TaskNode.parallel_for(blocks, label="reduce_r_blocks"))
    logger.debug("reduce over %d planes of %dx%d", r, rows, cols)
    return TaskNode.parallel_for(row_tasks, label="reduce_r")


def tc_reduce_r(
    planes: PlaneSet[Tensor], side: int, config: KernelConfig = DEFAULT_CONFIG
) -> TaskNode:
    """Fold contiguous tensor planes into plane 0.

    Each plane is viewed as side^(d-1) rows of side elements, so the span
    matches the matrix reducer: ceil(log2 side^(d-1)) + log2 of blocks + B.
    """
    if planes.shape and planes.shape[0] != side:
        raise ShapeError("Planes do not match the reduce side", f"{planes.shape} vs side {side}")
    flat = planes.as_matrices()
    rows, cols = flat.shape
    return mm_reduce_r(flat, rows, cols, config)
