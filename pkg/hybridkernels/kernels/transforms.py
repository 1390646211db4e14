"""Tensor transposition and tensor/matrix flattening.

``tt`` permutes the axes of a hypercube, ``tf`` flattens an order s'+s''
tensor into an n^s' x n^s'' matrix and ``td`` undoes it. All three recurse
on orthants in parallel down to a serial element-move leaf.
"""

from collections.abc import Sequence
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.errors import ShapeError
from hybridkernels.domain.models import RankVector
from hybridkernels.domain.tensors import Matrix, Tensor, linearize, selector_tuples
from hybridkernels.engine.tasks import TaskNode
from hybridkernels.kernels.config import DEFAULT_CONFIG, KernelConfig
from hybridkernels.kernels.leaves import MoveLeaf


class FlatteningOrder(Enum):
    """Bijection between index groups and matrix rows or columns."""

    MORTON = "morton"  # orthant-recursive; matches the parallel recursion
    ROW_MAJOR = "row-major"

    @property
    def recursive(self) -> bool:
        return self is FlatteningOrder.MORTON


def group_index(
    coords: Sequence[NDArray], side: int, order: FlatteningOrder = FlatteningOrder.MORTON
) -> NDArray:
    """Flatten per-axis coordinates of one index group to a 0-based position.

    Morton order takes one bit per axis per level, most significant level
    first and the first axis as the high bit within a level, which equals
    repeated linearize() of orthant selectors.
    """
    if not coords:
        return np.zeros((), dtype=np.int64)
    coords = [np.asarray(c, dtype=np.int64) for c in coords]
    index = np.zeros(coords[0].shape, dtype=np.int64)
    if order is FlatteningOrder.ROW_MAJOR:
        for c in coords:
            index = index * side + c
        return index
    for level in reversed(range(side.bit_length() - 1)):
        for c in coords:
            index = index * 2 + ((c >> level) & 1)
    return index


def _grid(order: int, side: int) -> tuple[NDArray, ...]:
    return tuple(np.indices((side,) * order, dtype=np.int64))


def _small(size: int, side: int, config: KernelConfig) -> bool:
    return side == 1 or 2 * size <= config.tc_base_footprint


def tt(w: Tensor, r: Tensor, ranks: RankVector, config: KernelConfig = DEFAULT_CONFIG) -> TaskNode:
    """Build W <- R transposed by ``ranks``: W[x] = R[x_{r_1}..x_{r_d}].

    Orthant p of W is filled from orthant q of R with q_j = p_{r_j}.

    Raises:
        ShapeError: If orders or sides disagree with each other or the rank vector
    """
    if not (w.order == r.order == ranks.order) or w.side != r.side:
        raise ShapeError(
            "Transpose operands must share order and side",
            f"W {w.shape}, R {r.shape}, rank vector of order {ranks.order}",
        )
    return _tt(w, r, ranks, config)


def _tt(w: Tensor, r: Tensor, ranks: RankVector, config: KernelConfig) -> TaskNode:
    if _small(w.size, w.side, config):
        grid = _grid(w.order, w.side)
        source = tuple(grid[rank - 1] for rank in ranks.ranks)
        return TaskNode.leaf(
            MoveLeaf(w, r, grid, source), work=w.size, label="tt_leaf", shape=w.shape
        )
    children = [
        _tt(w.orthant(p), r.orthant(ranks.source_halves(p)), ranks, config)
        for p in selector_tuples(w.order)
    ]
    return TaskNode.sequence(
        [TaskNode.fork(children, label="tt_fork")], overhead=1, label="tt", shape=w.shape
    )


def _check_flat(m: Matrix, t: Tensor, rows_order: int, cols_order: int) -> None:
    if rows_order < 0 or cols_order < 0 or t.order != rows_order + cols_order:
        raise ShapeError(
            "Tensor order must equal s' + s''", f"order {t.order}, s'={rows_order}, s''={cols_order}"
        )
    expected = (t.side**rows_order, t.side**cols_order)
    if m.shape != expected:
        raise ShapeError("Matrix shape does not match the flattening", f"{m.shape} vs {expected}")


def _flat_keys(
    side: int, rows_order: int, cols_order: int, order: FlatteningOrder
) -> tuple[tuple[NDArray, ...], tuple[NDArray, NDArray]]:
    grid = _grid(rows_order + cols_order, side)
    rows = group_index(grid[:rows_order], side, order)
    cols = group_index(grid[rows_order:], side, order)
    shape = (side,) * (rows_order + cols_order)
    return grid, (np.broadcast_to(rows, shape), np.broadcast_to(cols, shape))


def _flatten(
    m: Matrix,
    t: Tensor,
    rows_order: int,
    cols_order: int,
    config: KernelConfig,
    order: FlatteningOrder,
    inverse: bool,
) -> TaskNode:
    label = "td" if inverse else "tf"
    side = t.side
    if not order.recursive or _small(t.size, side, config):
        tensor_key, matrix_key = _flat_keys(side, rows_order, cols_order, order)
        action = (
            MoveLeaf(t, m, tensor_key, matrix_key)
            if inverse
            else MoveLeaf(m, t, matrix_key, tensor_key)
        )
        return TaskNode.leaf(action, work=t.size, label=f"{label}_leaf", shape=t.shape)
    half = side // 2
    block_rows, block_cols = half**rows_order, half**cols_order
    children = []
    for p in selector_tuples(t.order):
        row = (linearize(p[:rows_order]) - 1) * block_rows
        col = (linearize(p[rows_order:]) - 1) * block_cols
        children.append(
            _flatten(
                m.block(row, col, block_rows, block_cols),
                t.orthant(p),
                rows_order,
                cols_order,
                config,
                order,
                inverse,
            )
        )
    return TaskNode.sequence(
        [TaskNode.fork(children, label=f"{label}_fork")], overhead=1, label=label, shape=t.shape
    )


def tf(
    m: Matrix,
    t: Tensor,
    rows_order: int,
    cols_order: int,
    config: KernelConfig = DEFAULT_CONFIG,
    order: FlatteningOrder = FlatteningOrder.MORTON,
) -> TaskNode:
    """Build M <- flatten(T): the first s' axes index rows, the rest columns.

    Raises:
        ShapeError: If M is not n^s' x n^s'' or T is not of order s' + s''
    """
    _check_flat(m, t, rows_order, cols_order)
    return _flatten(m, t, rows_order, cols_order, config, order, inverse=False)


def td(
    t: Tensor,
    m: Matrix,
    rows_order: int,
    cols_order: int,
    config: KernelConfig = DEFAULT_CONFIG,
    order: FlatteningOrder = FlatteningOrder.MORTON,
) -> TaskNode:
    """Build T <- unflatten(M), the inverse of ``tf`` for the same order."""
    _check_flat(m, t, rows_order, cols_order)
    return _flatten(m, t, rows_order, cols_order, config, order, inverse=True)
