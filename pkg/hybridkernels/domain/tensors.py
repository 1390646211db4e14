"""Dense matrix and tensor storage with power-of-two halving views.

Storage is a flat row-major Buffer of ring elements. Matrix and Tensor are
frozen (offset, strides) descriptors into a buffer, so quadrant, half and
orthant extraction never copies: writes through a view land in the parent.
"""

from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from itertools import count
from typing import Generic, Optional, TypeVar

import numpy as np
from numpy.lib.stride_tricks import as_strided
from numpy.typing import NDArray

from hybridkernels.domain.errors import DegenerateSplitError, KernelError, ShapeError
from hybridkernels.domain.ring import Ring


def is_power_of_two(value: int) -> bool:
    """Check whether value is a positive power of two."""
    return value >= 1 and value & (value - 1) == 0


def log2_exact(value: int) -> int:
    """Base-2 logarithm of a power of two."""
    if not is_power_of_two(value):
        raise ShapeError("Extent must be a power of two", f"got {value}")
    return value.bit_length() - 1


class Buffer:
    """Flat storage with a process-unique id.

    Buffers created for run-time auxiliaries start unallocated; the executor
    materialises them at their alloc node and releases them at the matching
    free node.
    """

    __slots__ = ("id", "size", "ring", "_data")

    _ids = count()

    def __init__(self, size: int, ring: Ring, data: Optional[NDArray] = None):
        if size < 1:
            raise ShapeError("Buffer size must be positive", f"got {size}")
        self.id = next(Buffer._ids)
        self.size = size
        self.ring = ring
        self._data = data

    @classmethod
    def create(cls, size: int, ring: Ring) -> "Buffer":
        """Allocate a zero-filled buffer."""
        return cls(size, ring, ring.zeros(size))

    @classmethod
    def deferred(cls, size: int, ring: Ring) -> "Buffer":
        """Declare a buffer whose storage is allocated at run time."""
        return cls(size, ring)

    @property
    def is_allocated(self) -> bool:
        return self._data is not None

    @property
    def data(self) -> NDArray:
        if self._data is None:
            raise KernelError("Buffer is not allocated", f"buffer {self.id}")
        return self._data

    def allocate(self) -> None:
        """Materialise zero-filled storage."""
        self._data = self.ring.zeros(self.size)

    def release(self) -> None:
        """Drop the storage."""
        self._data = None

    def __repr__(self) -> str:
        state = "allocated" if self.is_allocated else "deferred"
        return f"Buffer(id={self.id}, size={self.size}, {state})"


class Quadrant(Enum):
    """Quadrant of a square matrix as (row half, column half)."""

    Q11 = (1, 1)
    Q12 = (1, 2)
    Q21 = (2, 1)
    Q22 = (2, 2)

    @classmethod
    def parse(cls, value: "Quadrant | str | int") -> "Quadrant":
        """Accept a Quadrant, "21", or 21."""
        if isinstance(value, Quadrant):
            return value
        text = str(value)
        for member in cls:
            if member.name[1:] == text:
                return member
        raise ValueError(f"Unknown quadrant: {value!r}")


@dataclass(frozen=True, slots=True, eq=False)
class Matrix:
    """Row-major view of rows x cols ring elements inside a Buffer."""

    buffer: Buffer
    rows: int
    cols: int
    offset: int = 0
    row_stride: int = 0

    def __post_init__(self) -> None:
        """Validate extents and bounds."""
        if not (is_power_of_two(self.rows) and is_power_of_two(self.cols)):
            raise ShapeError(
                "Matrix extents must be powers of two", f"got {self.rows}x{self.cols}"
            )
        if self.row_stride == 0:
            object.__setattr__(self, "row_stride", self.cols)
        if self.row_stride < self.cols and self.rows > 1:
            raise ShapeError("Row stride shorter than a row", f"stride {self.row_stride}")
        last = self.offset + (self.rows - 1) * self.row_stride + self.cols
        if self.offset < 0 or last > self.buffer.size:
            raise ShapeError(
                "View exceeds its buffer", f"needs {last} of {self.buffer.size} elements"
            )

    @classmethod
    def create(cls, rows: int, cols: int, ring: Ring) -> "Matrix":
        """Allocate a zero matrix.

        Example:
            >>> m = Matrix.create(4, 4, ModularRing())
        """
        return cls(Buffer.create(rows * cols, ring), rows, cols)

    @classmethod
    def from_array(cls, values: NDArray | Sequence[Sequence[int]], ring: Ring) -> "Matrix":
        """Copy a 2-D array into fresh storage."""
        arr = np.asarray(values, dtype=ring.dtype)
        if arr.ndim != 2:
            raise ShapeError("Matrix needs a 2-D array", f"got {arr.ndim} dimensions")
        rows, cols = arr.shape
        buffer = Buffer(rows * cols, ring, np.ascontiguousarray(arr).reshape(-1).copy())
        return cls(buffer, rows, cols)

    @classmethod
    def deferred(cls, rows: int, cols: int, ring: Ring) -> "Matrix":
        """Matrix over a buffer that is allocated at run time."""
        return cls(Buffer.deferred(rows * cols, ring), rows, cols)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def ring(self) -> Ring:
        return self.buffer.ring

    def array(self) -> NDArray:
        """Writable numpy view onto the elements."""
        data = self.buffer.data
        step = data.itemsize
        return as_strided(
            data[self.offset :],
            shape=(self.rows, self.cols),
            strides=(self.row_stride * step, step),
        )

    def to_numpy(self) -> NDArray:
        """Copy of the elements."""
        return self.array().copy()

    def element_indices(self) -> NDArray:
        """Buffer index of every element, shaped like the matrix."""
        rows = np.arange(self.rows, dtype=np.int64)[:, None] * self.row_stride
        cols = np.arange(self.cols, dtype=np.int64)[None, :]
        return self.offset + rows + cols

    def _window(self, row: int, col: int, rows: int, cols: int) -> "Matrix":
        return Matrix(
            self.buffer, rows, cols, self.offset + row * self.row_stride + col, self.row_stride
        )

    def quadrant(self, q: "Quadrant | str | int") -> "Matrix":
        return quadrant(self, q)

    def top(self) -> "Matrix":
        """Upper half of the rows (X_T)."""
        if self.rows < 2:
            raise DegenerateSplitError("Cannot halve a single row", f"shape {self.shape}")
        return self._window(0, 0, self.rows // 2, self.cols)

    def bottom(self) -> "Matrix":
        """Lower half of the rows (X_B)."""
        if self.rows < 2:
            raise DegenerateSplitError("Cannot halve a single row", f"shape {self.shape}")
        return self._window(self.rows // 2, 0, self.rows // 2, self.cols)

    def left(self) -> "Matrix":
        """Left half of the columns (X_L)."""
        if self.cols < 2:
            raise DegenerateSplitError("Cannot halve a single column", f"shape {self.shape}")
        return self._window(0, 0, self.rows, self.cols // 2)

    def right(self) -> "Matrix":
        """Right half of the columns (X_R)."""
        if self.cols < 2:
            raise DegenerateSplitError("Cannot halve a single column", f"shape {self.shape}")
        return self._window(0, self.cols // 2, self.rows, self.cols // 2)

    def block(self, row: int, col: int, rows: int, cols: int) -> "Matrix":
        """Sub-matrix view starting at (row, col)."""
        if row < 0 or col < 0 or row + rows > self.rows or col + cols > self.cols:
            raise ShapeError(
                "Block outside the matrix", f"{rows}x{cols} at ({row},{col}) in {self.shape}"
            )
        return self._window(row, col, rows, cols)

    def row(self, index: int) -> "Matrix":
        """Single row as a 1 x cols view."""
        return self.block(index, 0, 1, self.cols)

    def segments(self, width: int) -> Iterator["Matrix"]:
        """Split each row into 1 x min(width, cols) windows, row by row."""
        width = min(width, self.cols)
        for row in range(self.rows):
            for col in range(0, self.cols, width):
                yield self._window(row, col, 1, width)

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols} @ buffer {self.buffer.id}+{self.offset})"


@dataclass(frozen=True, slots=True, eq=False)
class Tensor:
    """Hypercube view: order axes of extent side, arbitrary per-axis strides."""

    buffer: Buffer
    order: int
    side: int
    offset: int = 0
    strides: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        """Validate extents and bounds."""
        if self.order < 0:
            raise ShapeError("Tensor order must be nonnegative", f"got {self.order}")
        if not is_power_of_two(self.side):
            raise ShapeError("Tensor side must be a power of two", f"got {self.side}")
        if not self.strides and self.order > 0:
            object.__setattr__(self, "strides", row_major_strides(self.order, self.side))
        if len(self.strides) != self.order:
            raise ShapeError(
                "One stride per axis required", f"{len(self.strides)} strides, order {self.order}"
            )
        last = self.offset + sum((self.side - 1) * s for s in self.strides) + 1
        if self.offset < 0 or last > self.buffer.size:
            raise ShapeError(
                "View exceeds its buffer", f"needs {last} of {self.buffer.size} elements"
            )

    @classmethod
    def create(cls, order: int, side: int, ring: Ring) -> "Tensor":
        """Allocate a zero tensor."""
        return cls(Buffer.create(side**order, ring), order, side)

    @classmethod
    def deferred(cls, order: int, side: int, ring: Ring) -> "Tensor":
        """Tensor over a buffer that is allocated at run time."""
        return cls(Buffer.deferred(side**order, ring), order, side)

    @classmethod
    def from_array(cls, values: NDArray, ring: Ring) -> "Tensor":
        """Copy a hypercube numpy array into fresh storage."""
        arr = np.asarray(values, dtype=ring.dtype)
        order = arr.ndim
        side = arr.shape[0] if order else 1
        if any(extent != side for extent in arr.shape):
            raise ShapeError("Tensor must be a hypercube", f"got shape {arr.shape}")
        buffer = Buffer(max(arr.size, 1), ring, np.ascontiguousarray(arr).reshape(-1).copy())
        return cls(buffer, order, side)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.order

    @property
    def size(self) -> int:
        return int(self.side**self.order)

    @property
    def ring(self) -> Ring:
        return self.buffer.ring

    @property
    def is_contiguous(self) -> bool:
        return self.strides == row_major_strides(self.order, self.side)

    def array(self) -> NDArray:
        """Writable numpy view onto the elements."""
        data = self.buffer.data
        step = data.itemsize
        return as_strided(
            data[self.offset :],
            shape=self.shape,
            strides=tuple(s * step for s in self.strides),
        )

    def to_numpy(self) -> NDArray:
        """Copy of the elements."""
        return self.array().copy()

    def element_indices(self) -> NDArray:
        """Buffer index of every element, shaped like the tensor."""
        index = np.full(self.shape, self.offset, dtype=np.int64)
        for axis, stride in enumerate(self.strides):
            shape = [1] * self.order
            shape[axis] = self.side
            index = index + (np.arange(self.side, dtype=np.int64) * stride).reshape(shape)
        return index

    def orthant(self, halves: Sequence[int]) -> "Tensor":
        return orthant(self, halves)

    def as_matrix(self) -> Matrix:
        """Reinterpret a contiguous tensor as side^(order-1) x side rows."""
        if not self.is_contiguous or self.order < 1:
            raise ShapeError("Only contiguous tensors of order >= 1 flatten in place")
        return Matrix(self.buffer, self.side ** (self.order - 1), self.side, self.offset)

    def __repr__(self) -> str:
        return f"Tensor(order={self.order}, side={self.side} @ buffer {self.buffer.id}+{self.offset})"


def row_major_strides(order: int, side: int) -> tuple[int, ...]:
    """Strides of a contiguous hypercube, last axis fastest."""
    return tuple(side ** (order - 1 - axis) for axis in range(order))


def quadrant(matrix: Matrix, q: Quadrant | str | int) -> Matrix:
    """Select one quarter of a square matrix as a view.

    Args:
        matrix: Square matrix with side >= 2
        q: Quadrant id (Quadrant.Q21, "21" or 21)

    Returns:
        View sharing the parent's storage

    Raises:
        ShapeError: If the matrix is not square
        DegenerateSplitError: If the side is 1
    """
    q = Quadrant.parse(q)
    if matrix.rows != matrix.cols:
        raise ShapeError("Quadrants need a square matrix", f"shape {matrix.shape}")
    if matrix.rows < 2:
        raise DegenerateSplitError("Cannot split a 1x1 matrix into quadrants")
    half = matrix.rows // 2
    row_half, col_half = q.value
    return matrix._window((row_half - 1) * half, (col_half - 1) * half, half, half)


def orthant(tensor: Tensor, halves: Sequence[int]) -> Tensor:
    """Select the orthant with per-axis half selectors p_j in {1, 2}.

    Args:
        tensor: Tensor with side >= 2
        halves: One selector per axis

    Returns:
        View of side n/2 sharing the parent's storage
    """
    if len(halves) != tensor.order:
        raise ShapeError(
            "One half selector per axis required", f"{len(halves)} for order {tensor.order}"
        )
    if any(h not in (1, 2) for h in halves):
        raise ValueError(f"Half selectors must be 1 or 2, got {tuple(halves)}")
    if tensor.side < 2:
        raise DegenerateSplitError("Cannot split a tensor of side 1")
    half = tensor.side // 2
    offset = tensor.offset + sum(
        (h - 1) * half * stride for h, stride in zip(halves, tensor.strides, strict=True)
    )
    return Tensor(tensor.buffer, tensor.order, half, offset, tensor.strides)


def linearize(bits: Sequence[int]) -> int:
    """Map half selectors b_1..b_k (b_1 most significant) to [1, 2^k].

    Example:
        >>> linearize((2, 1, 2))
        6
    """
    index = 0
    for bit in bits:
        if bit not in (1, 2):
            raise ValueError(f"Half selectors must be 1 or 2, got {bit}")
        index = index * 2 + (bit - 1)
    return index + 1


def delinearize(index: int, k: int) -> tuple[int, ...]:
    """Inverse of linearize for k selectors."""
    if not 1 <= index <= 2**k:
        raise ValueError(f"Index {index} outside [1, {2**k}]")
    value = index - 1
    return tuple(((value >> (k - 1 - j)) & 1) + 1 for j in range(k))


def selector_tuples(k: int) -> Iterator[tuple[int, ...]]:
    """All half-selector tuples of length k in linearize order."""
    for index in range(1, 2**k + 1):
        yield delinearize(index, k)


View = TypeVar("View", Matrix, Tensor)


@dataclass(frozen=True, slots=True, eq=False)
class PlaneSet(Generic[View]):
    """r same-shaped accumulation planes with a selected range [lo..hi].

    Planes of one allocation live back to back in a single buffer. ``start``
    is the absolute index of ``planes[0]``, so sub-ranges keep the plane
    numbering of the full allocation.
    """

    planes: tuple[View, ...]
    start: int = 0

    def __post_init__(self) -> None:
        if not self.planes:
            raise ShapeError("A plane set needs at least one plane")
        first = self.planes[0]
        if any(p.shape != first.shape for p in self.planes):
            raise ShapeError("All planes must share one shape")

    @classmethod
    def matrices(cls, r: int, rows: int, cols: int, ring: Ring) -> "PlaneSet[Matrix]":
        """Allocate r zeroed matrix planes in one buffer."""
        return PlaneSet(_matrix_planes(Buffer.create(r * rows * cols, ring), r, rows, cols))

    @classmethod
    def deferred_matrices(cls, r: int, rows: int, cols: int, ring: Ring) -> "PlaneSet[Matrix]":
        """Matrix planes whose buffer is allocated at run time."""
        return PlaneSet(_matrix_planes(Buffer.deferred(r * rows * cols, ring), r, rows, cols))

    @classmethod
    def tensors(cls, r: int, order: int, side: int, ring: Ring) -> "PlaneSet[Tensor]":
        """Allocate r zeroed tensor planes in one buffer."""
        size = side**order
        buffer = Buffer.create(r * size, ring)
        return PlaneSet(tuple(Tensor(buffer, order, side, k * size) for k in range(r)))

    @property
    def r(self) -> int:
        return len(self.planes)

    @property
    def lo(self) -> int:
        return self.start

    @property
    def hi(self) -> int:
        return self.start + len(self.planes) - 1

    @property
    def first(self) -> View:
        return self.planes[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.planes[0].shape

    def plane(self, k: int) -> View:
        """Plane with absolute index k."""
        if not self.lo <= k <= self.hi:
            raise IndexError(f"Plane {k} outside [{self.lo}..{self.hi}]")
        return self.planes[k - self.start]

    def select(self, lo: int, hi: int) -> "PlaneSet[View]":
        """Sub-range [lo..hi] in absolute plane numbers."""
        if not self.lo <= lo <= hi <= self.hi:
            raise IndexError(f"Range [{lo}..{hi}] outside [{self.lo}..{self.hi}]")
        return PlaneSet(self.planes[lo - self.start : hi - self.start + 1], lo)

    def halves(self) -> tuple["PlaneSet[View]", "PlaneSet[View]"]:
        """Split at m = (lo + hi) // 2 into [lo..m] and [m+1..hi]."""
        if self.r < 2:
            raise DegenerateSplitError("Cannot split a single plane")
        mid = (self.lo + self.hi) // 2
        return self.select(self.lo, mid), self.select(mid + 1, self.hi)

    def partitions(self, parts: int) -> list["PlaneSet[View]"]:
        """Split the range into equal consecutive partitions."""
        if parts < 1 or self.r % parts:
            raise ShapeError("Plane range does not divide evenly", f"{self.r} into {parts}")
        width = self.r // parts
        return [
            self.select(self.lo + p * width, self.lo + (p + 1) * width - 1) for p in range(parts)
        ]

    def map(self, fn: Callable[[View], View]) -> "PlaneSet[View]":
        """Apply a view transformation to every plane."""
        return replace(self, planes=tuple(fn(p) for p in self.planes))

    def quadrant(self, q: Quadrant | str | int) -> "PlaneSet[View]":
        return self.map(lambda p: quadrant(p, q))  # type: ignore[arg-type, return-value]

    def orthant(self, halves: Sequence[int]) -> "PlaneSet[View]":
        return self.map(lambda p: orthant(p, halves))  # type: ignore[arg-type, return-value]

    def top(self) -> "PlaneSet[View]":
        return self.map(lambda p: p.top())  # type: ignore[union-attr]

    def bottom(self) -> "PlaneSet[View]":
        return self.map(lambda p: p.bottom())  # type: ignore[union-attr]

    def left(self) -> "PlaneSet[View]":
        return self.map(lambda p: p.left())  # type: ignore[union-attr]

    def right(self) -> "PlaneSet[View]":
        return self.map(lambda p: p.right())  # type: ignore[union-attr]

    def as_matrices(self) -> "PlaneSet[Matrix]":
        """Flatten contiguous tensor planes to matrices, same storage."""
        views = tuple(p if isinstance(p, Matrix) else p.as_matrix() for p in self.planes)
        return PlaneSet(views, self.start)


def _matrix_planes(buffer: Buffer, r: int, rows: int, cols: int) -> tuple[Matrix, ...]:
    return tuple(Matrix(buffer, rows, cols, k * rows * cols) for k in range(r))
