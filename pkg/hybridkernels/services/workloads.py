"""Named kernel instances with random operands.

The CLI, the verification suites and the sweeps all build their task trees
here, so one name ("mm-opt", "tc-hs", ...) means the same thing everywhere.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from hybridkernels.domain.errors import ShapeError, UnknownAlgorithmError
from hybridkernels.domain.models import ContractionSpec, RankVector
from hybridkernels.domain.ring import Ring
from hybridkernels.domain.tensors import Matrix, PlaneSet, Tensor
from hybridkernels.engine.tasks import TaskNode
from hybridkernels.kernels.config import DEFAULT_CONFIG, KernelConfig
from hybridkernels.kernels.mm import mm, mm_hd, mm_nd, mm_ns, mm_opt, mm_tradeoff
from hybridkernels.kernels.reduce import mm_reduce_r
from hybridkernels.kernels.rmm import rmm, rmm_opt
from hybridkernels.kernels.tc import tc, tc_hs, tc_mm_opt
from hybridkernels.kernels.transforms import FlatteningOrder, td, tf, tt

logger = logging.getLogger(__name__)

MM_KERNELS = ("mm", "mm-hd", "mm-opt", "mm-nd", "mm-ns", "mm-tradeoff")
RMM_KERNELS = ("rmm", "rmm-opt")
TC_KERNELS = ("tc", "tc-hs", "tc-mm-opt")
TRANSFORM_KERNELS = ("tt", "tf-td")
KERNELS = MM_KERNELS + RMM_KERNELS + TC_KERNELS + TRANSFORM_KERNELS + ("reduce",)

View = Matrix | Tensor


@dataclass(frozen=True, slots=True)
class Workload:
    """A built task tree plus the views it reads and writes."""

    kernel: str
    params: dict[str, Any]
    tree: TaskNode
    output: View
    inputs: tuple[View, ...]
    spec: Optional[ContractionSpec] = None
    mult_adds: Optional[int] = None  # exact multiply-add count, when defined


def normalize_kernel(name: str) -> str:
    return name.strip().lower().replace("_", "-")


def _int(params: Mapping[str, Any], key: str, default: Optional[int] = None) -> int:
    if key in params and params[key] is not None:
        return int(params[key])
    if default is None:
        raise ShapeError(f"Parameter {key!r} is required")
    return default


def _matrix(ring: Ring, rng: np.random.Generator, rows: int, cols: int) -> Matrix:
    return Matrix.from_array(ring.random(rng, (rows, cols)), ring)


def _tensor(ring: Ring, rng: np.random.Generator, order: int, side: int) -> Tensor:
    return Tensor.from_array(ring.random(rng, (side,) * order), ring)


def build_workload(
    kernel: str,
    params: Mapping[str, Any],
    ring: Ring,
    rng: np.random.Generator,
    config: KernelConfig = DEFAULT_CONFIG,
) -> Workload:
    """Build a named kernel on random operands.

    Args:
        kernel: Kernel name, see KERNELS
        params: n, r, p, a, b, c, u, v, x, u_axes, v_axes, d, ranks, s1, s2, order
        ring: Scalar ring of the operands
        rng: Source of operand values
        config: Kernel thresholds

    Returns:
        Workload whose params echo every value actually used

    Raises:
        UnknownAlgorithmError: If the kernel name is not registered
    """
    name = normalize_kernel(kernel)
    used = dict(params)
    if name in MM_KERNELS or name == "reduce":
        return _build_square(name, used, ring, rng, config)
    if name in RMM_KERNELS:
        return _build_rect(name, used, ring, rng, config)
    if name in TC_KERNELS:
        return _build_contraction(name, used, ring, rng, config)
    if name in TRANSFORM_KERNELS:
        return _build_transform(name, used, ring, rng, config)
    raise UnknownAlgorithmError(f"Unknown kernel {kernel!r}", ", ".join(KERNELS))


def _build_square(
    name: str, used: dict[str, Any], ring: Ring, rng: np.random.Generator, config: KernelConfig
) -> Workload:
    n = _int(used, "n")
    u, v = _matrix(ring, rng, n, n), _matrix(ring, rng, n, n)
    if name == "reduce":
        r = _int(used, "r", 2)
        planes = PlaneSet.matrices(r, n, n, ring)
        planes.first.buffer.data[:] = ring.random(rng, (r * n * n,))
        tree = mm_reduce_r(planes, n, n, config)
        return Workload(name, used, tree, planes.first, planes.planes)
    if name in ("mm", "mm-hd", "mm-nd"):
        x = Matrix.create(n, n, ring)
        if name == "mm":
            tree = mm(x, u, v, config)
        elif name == "mm-hd":
            used["r"] = _int(used, "r", 1)
            tree = mm_hd(x, u, v, used["r"], config)
        else:
            tree = mm_nd(x, u, v, config)
        return Workload(name, used, tree, x, (u, v), mult_adds=n**3)
    r = _int(used, "r", 1) if name == "mm-opt" else n
    planes = PlaneSet.matrices(r, n, n, ring)
    if name == "mm-opt":
        used["r"] = r
        tree = mm_opt(planes, u, v, config)
    elif name == "mm-ns":
        tree = mm_ns(planes, u, v, config)
    else:
        used["p"] = _int(used, "p", 1)
        tree = mm_tradeoff(planes, u, v, used["p"], config)
    return Workload(name, used, tree, planes.first, (u, v), mult_adds=n**3)


def _build_rect(
    name: str, used: dict[str, Any], ring: Ring, rng: np.random.Generator, config: KernelConfig
) -> Workload:
    a, b, c = _int(used, "a"), _int(used, "b"), _int(used, "c")
    u, v = _matrix(ring, rng, a, b), _matrix(ring, rng, b, c)
    if name == "rmm":
        x = Matrix.create(a, c, ring)
        return Workload(name, used, rmm(x, u, v, config), x, (u, v), mult_adds=a * b * c)
    used["r"] = _int(used, "r", 1)
    planes = PlaneSet.matrices(used["r"], a, c, ring)
    tree = rmm_opt(planes, u, v, config)
    return Workload(name, used, tree, planes.first, (u, v), mult_adds=a * b * c)


def _build_contraction(
    name: str, used: dict[str, Any], ring: Ring, rng: np.random.Generator, config: KernelConfig
) -> Workload:
    n = _int(used, "n")
    spec = ContractionSpec.create(
        _int(used, "u", 1),
        _int(used, "v", 1),
        _int(used, "x", 1),
        used.get("u_axes"),
        used.get("v_axes"),
    )
    u = _tensor(ring, rng, spec.u + spec.x, n)
    v = _tensor(ring, rng, spec.v + spec.x, n)
    r = _int(used, "r", 1)
    if name == "tc":
        out = Tensor.create(spec.u + spec.v, n, ring)
        tree = tc(out, u, v, spec, config)
    elif name == "tc-hs":
        planes = PlaneSet.tensors(r, spec.u + spec.v, n, ring)
        tree = tc_hs(planes, u, v, spec, config)
        out = planes.first
    else:
        out = Tensor.create(spec.u + spec.v, n, ring)
        order = FlatteningOrder(used.get("order", FlatteningOrder.MORTON.value))
        tree = tc_mm_opt(out, u, v, spec, r, config, order)
    return Workload(name, used, tree, out, (u, v), spec=spec, mult_adds=n**spec.w)


def _build_transform(
    name: str, used: dict[str, Any], ring: Ring, rng: np.random.Generator, config: KernelConfig
) -> Workload:
    n = _int(used, "n")
    if name == "tt":
        d = _int(used, "d")
        if "ranks" in used:
            ranks = RankVector.parse(str(used["ranks"]))
        else:
            ranks = RankVector.create(rng.permutation(d) + 1)
            used["ranks"] = ",".join(map(str, ranks.ranks))
        source = _tensor(ring, rng, d, n)
        target = Tensor.create(d, n, ring)
        return Workload(name, used, tt(target, source, ranks, config), target, (source,))
    s1, s2 = _int(used, "s1", 1), _int(used, "s2", 1)
    order = FlatteningOrder(used.get("order", FlatteningOrder.MORTON.value))
    source = _tensor(ring, rng, s1 + s2, n)
    flat = Matrix.create(n**s1, n**s2, ring)
    restored = Tensor.create(s1 + s2, n, ring)
    tree = TaskNode.sequence(
        [tf(flat, source, s1, s2, config, order), td(restored, flat, s1, s2, config, order)],
        label="tf-td",
    )
    return Workload(name, used, tree, restored, (source,))
