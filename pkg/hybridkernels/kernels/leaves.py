"""Serial leaf bodies shared by the kernel builders.

Each action computes with vectorised ring operations and reproduces the
access order of the equivalent scalar loop nest in ``trace``.
"""

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.models import RankVector
from hybridkernels.domain.tensors import Buffer, Matrix, Tensor
from hybridkernels.engine.tasks import READ, WRITE, LeafAction, make_trace

IndexKey = tuple[NDArray, ...]


def product_trace(
    x: tuple[Buffer, NDArray], u: tuple[Buffer, NDArray], v: tuple[Buffer, NDArray]
) -> NDArray:
    """Trace of X += U V as loops i, j, k with a read-modify-write of X[i, j].

    Index arrays are 2-D: X (a, c), U (a, b), V (b, c).
    """
    (xb, xi), (ub, ui), (vb, vi) = x, u, v
    a, b = ui.shape
    c = vi.shape[1]
    shape = (a, c, b)
    u_col = np.broadcast_to(ui[:, None, :], shape)
    v_col = np.broadcast_to(vi.T[None, :, :], shape)
    x_col = np.broadcast_to(xi[:, :, None], shape)
    return make_trace([(ub, u_col, READ), (vb, v_col, READ), (xb, x_col, READ), (xb, x_col, WRITE)])


class MatMulLeaf(LeafAction):
    """X += U V on matrix views (the serial base case)."""

    __slots__ = ("x", "u", "v")

    def __init__(self, x: Matrix, u: Matrix, v: Matrix):
        super().__init__((u, v, x), (x,))
        self.x, self.u, self.v = x, u, v

    def execute(self) -> None:
        self.x.ring.mul_add(self.x.array(), self.u.array(), self.v.array())

    def trace(self) -> NDArray:
        return product_trace(
            (self.x.buffer, self.x.element_indices()),
            (self.u.buffer, self.u.element_indices()),
            (self.v.buffer, self.v.element_indices()),
        )


class ContractLeaf(LeafAction):
    """X{i,j} += sum_k U{i,k} V{k,j} on tensor views of one side.

    ``u_axes`` and ``v_axes`` permute U and V into the canonical layouts
    (i.., k..) and (k.., j..); X is always (i.., j..).
    """

    __slots__ = ("x", "u", "v", "u_perm", "v_perm", "groups")

    def __init__(
        self,
        x: Tensor,
        u: Tensor,
        v: Tensor,
        u_perm: RankVector,
        v_perm: RankVector,
        groups: tuple[int, int, int],
    ):
        super().__init__((u, v, x), (x,))
        self.x, self.u, self.v = x, u, v
        self.u_perm, self.v_perm = u_perm, v_perm
        self.groups = groups

    def _flat(self) -> tuple[int, int, int]:
        m = self.x.side
        gu, gv, gx = self.groups
        return m**gu, m**gx, m**gv

    def execute(self) -> None:
        a, b, c = self._flat()
        u = np.transpose(self.u.array(), self.u_perm.numpy_axes()).reshape(a, b)
        v = np.transpose(self.v.array(), self.v_perm.numpy_axes()).reshape(b, c)
        x = self.x.array()
        ring = self.x.ring
        ring.add_into(x, ring.product(u, v).reshape(x.shape))

    def trace(self) -> NDArray:
        a, b, c = self._flat()
        ui = np.transpose(self.u.element_indices(), self.u_perm.numpy_axes()).reshape(a, b)
        vi = np.transpose(self.v.element_indices(), self.v_perm.numpy_axes()).reshape(b, c)
        xi = self.x.element_indices().reshape(a, c)
        return product_trace((self.x.buffer, xi), (self.u.buffer, ui), (self.v.buffer, vi))


class AddLeaf(LeafAction):
    """X += Y elementwise."""

    __slots__ = ("x", "y")

    def __init__(self, x: Matrix, y: Matrix):
        super().__init__((x, y), (x,))
        self.x, self.y = x, y

    def execute(self) -> None:
        self.x.ring.add_into(self.x.array(), self.y.array())

    def trace(self) -> NDArray:
        xi = self.x.element_indices()
        return make_trace(
            [
                (self.x.buffer, xi, READ),
                (self.y.buffer, self.y.element_indices(), READ),
                (self.x.buffer, xi, WRITE),
            ]
        )


class ReduceLeaf(LeafAction):
    """segments[0] += segments[1] + ... + segments[r-1]."""

    __slots__ = ("segments",)

    def __init__(self, segments: tuple[Matrix, ...]):
        super().__init__(segments, segments[:1])
        self.segments = segments

    def execute(self) -> None:
        target = self.segments[0]
        ring = target.ring
        out = target.array()
        for segment in self.segments[1:]:
            ring.add_into(out, segment.array())

    def trace(self) -> NDArray:
        columns = [(s.buffer, s.element_indices(), READ) for s in self.segments]
        target = self.segments[0]
        columns.append((target.buffer, target.element_indices(), WRITE))
        return make_trace(columns)


class MoveLeaf(LeafAction):
    """dst[dst_key] = src[src_key] for matching advanced-index keys."""

    __slots__ = ("dst", "src", "dst_key", "src_key")

    def __init__(
        self,
        dst: Matrix | Tensor,
        src: Matrix | Tensor,
        dst_key: IndexKey,
        src_key: IndexKey,
    ):
        super().__init__((src,), (dst,))
        self.dst, self.src = dst, src
        self.dst_key, self.src_key = dst_key, src_key

    def execute(self) -> None:
        self.dst.array()[self.dst_key] = self.src.array()[self.src_key]

    def trace(self) -> NDArray:
        return make_trace(
            [
                (self.src.buffer, self.src.element_indices()[self.src_key], READ),
                (self.dst.buffer, self.dst.element_indices()[self.dst_key], WRITE),
            ]
        )
