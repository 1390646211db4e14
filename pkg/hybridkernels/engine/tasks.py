"""Fork-join task trees.

Every kernel is expressed as a tree of TaskNode values. Internal nodes are
sequences (optionally charging call bookkeeping), binary-forked parallel
steps and parallel-for loops; leaves run one serial base-case body.
Alloc/free nodes bracket run-time auxiliary buffers.
"""

from abc import ABC, abstractmethod
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.tensors import Buffer, Matrix, Tensor

TRACE_DTYPE = np.dtype([("buffer", "<u4"), ("index", "<u8"), ("rw", "u1")])
READ = 0
WRITE = 1


class TaskKind(Enum):
    """Node kinds of a task tree."""

    LEAF = "leaf"
    FORK = "fork"
    SEQUENCE = "sequence"
    PARALLEL_FOR = "parallel_for"
    ALLOC = "alloc"
    FREE = "free"


class LeafAction(ABC):
    """Serial base-case body of a leaf node.

    Subclasses declare the views they read and write; the race checker and
    the space accounting work from these declarations alone.
    """

    __slots__ = ("inputs", "outputs")

    def __init__(self, inputs: Sequence[Matrix | Tensor], outputs: Sequence[Matrix | Tensor]):
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)

    @abstractmethod
    def execute(self) -> None:
        """Run the body against the current buffer contents."""

    @abstractmethod
    def trace(self) -> NDArray:
        """Ordered memory accesses of the body as TRACE_DTYPE records."""

    def write_indices(self) -> Iterator[tuple[Buffer, NDArray]]:
        """Yield (buffer, flat element indices) written by the body."""
        for view in self.outputs:
            yield view.buffer, view.element_indices().reshape(-1)


def make_trace(columns: Sequence[tuple[Buffer, NDArray, int]]) -> NDArray:
    """Interleave per-step access columns into one trace.

    Each column holds one access per loop step; step t emits column 0's
    access, then column 1's, and so on.
    """
    steps = int(np.asarray(columns[0][1]).size)
    records = np.empty((steps, len(columns)), dtype=TRACE_DTYPE)
    for slot, (buffer, indices, rw) in enumerate(columns):
        records["buffer"][:, slot] = buffer.id
        records["index"][:, slot] = np.asarray(indices, dtype=np.int64).reshape(-1)
        records["rw"][:, slot] = rw
    return records.reshape(-1)


@dataclass(frozen=True, slots=True, eq=False)
class TaskNode:
    """One node of a fork-join task tree.

    Use the factory classmethods rather than the constructor.
    """

    kind: TaskKind
    children: tuple["TaskNode", ...] = ()
    label: str = ""
    work: int = 0  # leaf body work in multiply-add or element-move units
    span: int = 0  # leaf body span
    mult_adds: int = 0
    overhead: int = 0  # bookkeeping units charged by a sequence node
    action: Optional[LeafAction] = None
    buffer: Optional[Buffer] = None  # alloc/free target
    plane_range: Optional[tuple[int, int]] = None
    shape: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        """Validate node invariants."""
        if self.kind is TaskKind.LEAF:
            if self.children:
                raise ValueError("Leaves have no children")
            if self.span > self.work:
                raise ValueError("Leaf span cannot exceed its work")
        if self.kind in (TaskKind.ALLOC, TaskKind.FREE) and self.buffer is None:
            raise ValueError(f"{self.kind.value} node needs a buffer")
        if min(self.work, self.span, self.mult_adds, self.overhead) < 0:
            raise ValueError("Costs must be nonnegative")

    @classmethod
    def leaf(
        cls,
        action: LeafAction,
        work: int,
        span: Optional[int] = None,
        mult_adds: int = 0,
        label: str = "leaf",
        shape: tuple[int, ...] = (),
        plane_range: Optional[tuple[int, int]] = None,
    ) -> "TaskNode":
        """Serial leaf; span defaults to its work."""
        return cls(
            TaskKind.LEAF,
            label=label,
            work=work,
            span=work if span is None else span,
            mult_adds=mult_adds,
            action=action,
            shape=shape,
            plane_range=plane_range,
        )

    @classmethod
    def fork(
        cls,
        children: Sequence["TaskNode"],
        label: str = "fork",
        plane_range: Optional[tuple[int, int]] = None,
    ) -> "TaskNode":
        """Parallel step; all children join before the parent continues."""
        return cls(TaskKind.FORK, tuple(children), label=label, plane_range=plane_range)

    @classmethod
    def sequence(
        cls,
        children: Sequence["TaskNode"] = (),
        overhead: int = 0,
        label: str = "seq",
        plane_range: Optional[tuple[int, int]] = None,
        shape: tuple[int, ...] = (),
    ) -> "TaskNode":
        """Children run one after another."""
        return cls(
            TaskKind.SEQUENCE,
            tuple(children),
            label=label,
            overhead=overhead,
            plane_range=plane_range,
            shape=shape,
        )

    @classmethod
    def parallel_for(cls, children: Sequence["TaskNode"], label: str = "parallel_for") -> "TaskNode":
        """Loop whose iterations are spawned by a binary fork tree."""
        return cls(TaskKind.PARALLEL_FOR, tuple(children), label=label)

    @classmethod
    def alloc(cls, buffer: Buffer, label: str = "alloc") -> "TaskNode":
        return cls(TaskKind.ALLOC, label=label, buffer=buffer)

    @classmethod
    def free(cls, buffer: Buffer, label: str = "free") -> "TaskNode":
        return cls(TaskKind.FREE, label=label, buffer=buffer)

    @property
    def is_parallel(self) -> bool:
        return self.kind in (TaskKind.FORK, TaskKind.PARALLEL_FOR)

    def walk(self) -> Iterator["TaskNode"]:
        """Pre-order traversal, children left to right."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> Iterator["TaskNode"]:
        return (node for node in self.walk() if node.kind is TaskKind.LEAF)

    def find(self, label: str) -> list["TaskNode"]:
        """All nodes carrying ``label``, in pre-order."""
        return [node for node in self.walk() if node.label == label]

    def __repr__(self) -> str:
        return f"TaskNode({self.kind.value}, {self.label!r}, children={len(self.children)})"


class NullAction(LeafAction):
    """Declares accesses without computing anything.

    Used to assemble synthetic trees whose cost or write sets are the point.
    """

    __slots__ = ()

    def execute(self) -> None:
        return None

    def trace(self) -> NDArray:
        parts = [
            make_trace([(view.buffer, view.element_indices(), READ)]) for view in self.inputs
        ]
        parts += [
            make_trace([(view.buffer, view.element_indices(), WRITE)]) for view in self.outputs
        ]
        if not parts:
            return np.empty(0, dtype=TRACE_DTYPE)
        return np.concatenate(parts)
