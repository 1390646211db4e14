"""Disjoint-write checking for fork-join task trees.

For every parallel node the write sets of distinct children must be
pairwise disjoint. Write sets are kept as sorted arrays of packed
(buffer id, element index) keys.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from hybridkernels.engine.tasks import TaskKind, TaskNode

logger = logging.getLogger(__name__)

_INDEX_BITS = 40
_INDEX_MASK = (1 << _INDEX_BITS) - 1
_EMPTY = np.empty(0, dtype=np.int64)


@dataclass(frozen=True, slots=True)
class RaceReport:
    """Outcome of a race check; a violation names the node and the cell."""

    ok: bool
    node_label: str = ""
    node_path: str = ""
    buffer_id: Optional[int] = None
    index: Optional[int] = None
    children: Optional[tuple[int, int]] = None
    clashes: int = 0

    @classmethod
    def clean(cls) -> "RaceReport":
        return cls(ok=True)

    def describe(self) -> str:
        """One-line summary for logs and the CLI table."""
        if self.ok:
            return "ok"
        assert self.children is not None
        return (
            f"violation at {self.node_path} ({self.node_label}): children "
            f"{self.children[0]} and {self.children[1]} both write buffer "
            f"{self.buffer_id} index {self.index} ({self.clashes} clashing cells)"
        )


class _Violation(Exception):
    def __init__(self, report: RaceReport):
        super().__init__(report.describe())
        self.report = report


def _pack(buffer_id: int, indices: NDArray) -> NDArray:
    return (np.int64(buffer_id) << _INDEX_BITS) | indices.astype(np.int64)


def _write_set(node: TaskNode, path: str) -> NDArray:
    if node.kind is TaskKind.LEAF:
        assert node.action is not None
        parts = [_pack(buffer.id, idx) for buffer, idx in node.action.write_indices()]
        return np.unique(np.concatenate(parts)) if parts else _EMPTY
    if not node.children:
        return _EMPTY
    sets = [_write_set(child, f"{path}/{i}") for i, child in enumerate(node.children)]
    merged = np.concatenate(sets)
    union = np.unique(merged)
    if node.is_parallel and union.size < merged.size:
        _report(node, path, sets, merged)
    return union


def _contains(keys: NDArray, key: np.int64) -> bool:
    position = int(np.searchsorted(keys, key))
    return position < keys.size and bool(keys[position] == key)


def _report(node: TaskNode, path: str, sets: list[NDArray], merged: NDArray) -> None:
    ordered = np.sort(merged)
    duplicates = np.unique(ordered[1:][ordered[1:] == ordered[:-1]])
    key = duplicates[0]
    owners = [i for i, s in enumerate(sets) if _contains(s, key)]
    raise _Violation(
        RaceReport(
            ok=False,
            node_label=node.label,
            node_path=path,
            buffer_id=int(key >> _INDEX_BITS),
            index=int(key & _INDEX_MASK),
            children=(owners[0], owners[1]),
            clashes=int(duplicates.size),
        )
    )


def check_race_freedom(root: TaskNode) -> RaceReport:
    """Check that parallel children never write the same cell.

    Args:
        root: Task tree whose leaves declare their output views

    Returns:
        RaceReport.clean() or the first violation found (post-order)
    """
    try:
        _write_set(root, "root")
    except _Violation as violation:
        logger.warning("Race detected: %s", violation.report.describe())
        return violation.report
    return RaceReport.clean()
