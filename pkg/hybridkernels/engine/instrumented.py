"""Deterministic single-threaded executor with work/span/space accounting.

Leaves run in a fixed order (children left to right). Costs follow the
binary-forking convention: spawning and joining k children costs
ceil(log2 k) span each way, a parallel-for pays its spawn tree once, and an
allocation of s elements costs ceil(log2(s + 1)).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.models import ExecMetrics
from hybridkernels.domain.settings import CostModelSettings
from hybridkernels.domain.tensors import Buffer
from hybridkernels.engine.tasks import TRACE_DTYPE, TaskKind, TaskNode

logger = logging.getLogger(__name__)


def ceil_log2(value: int) -> int:
    """ceil(log2 value) for value >= 1; 0 for value <= 1."""
    return max(value - 1, 0).bit_length()


@dataclass(frozen=True, slots=True)
class CostModel:
    """Unit costs, fixed for a whole run."""

    leaf_unit: int = 1
    call_overhead: int = 1
    fork_unit: int = 1
    alloc_unit: int = 1

    def __post_init__(self) -> None:
        """Validate that every constant is a positive integer."""
        for name in ("leaf_unit", "call_overhead", "fork_unit", "alloc_unit"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @classmethod
    def from_settings(cls, settings: CostModelSettings) -> "CostModel":
        return cls(
            leaf_unit=settings.leaf_unit,
            call_overhead=settings.call_overhead,
            fork_unit=settings.fork_unit,
            alloc_unit=settings.alloc_unit,
        )

    def fork(self, children: int) -> tuple[int, int]:
        """(work, span) of spawning and joining ``children`` tasks."""
        return 2 * max(children - 1, 0) * self.fork_unit, 2 * ceil_log2(children) * self.fork_unit

    def parallel_for(self, iterations: int) -> tuple[int, int]:
        """(work, span) of the spawn tree of a parallel loop."""
        return max(iterations - 1, 0) * self.fork_unit, ceil_log2(iterations) * self.fork_unit

    def alloc(self, size: int) -> int:
        """Work and span of allocating or releasing ``size`` elements."""
        return ceil_log2(size + 1) * self.alloc_unit


@dataclass(frozen=True, slots=True)
class InstrumentedRun:
    """Metrics of one instrumented run plus its optional access trace."""

    metrics: ExecMetrics
    trace: Optional[NDArray] = None


class _Instrumenter:
    """Walks a tree once, executing and costing it."""

    def __init__(self, cost: CostModel, execute: bool, record_trace: bool):
        self.cost = cost
        self.execute = execute
        self.record_trace = record_trace
        self.read: dict[int, Buffer] = {}
        self.written: dict[int, Buffer] = {}
        self.allocated: set[int] = set()
        self.traces: list[NDArray] = []
        self.forks = 0
        self.leaves = 0
        self.mult_adds = 0

    def visit(self, node: TaskNode) -> tuple[int, int, int, int]:
        """Return (work, span, peak dynamic space, net live delta)."""
        kind = node.kind
        if kind is TaskKind.LEAF:
            return self._leaf(node)
        if kind is TaskKind.SEQUENCE:
            work = span = node.overhead * self.cost.call_overhead
            live = peak = 0
            for child in node.children:
                w, s, p, n = self.visit(child)
                work += w
                span += s
                peak = max(peak, live + p)
                live += n
            return work, span, peak, live
        if kind is TaskKind.FORK or kind is TaskKind.PARALLEL_FOR:
            self.forks += 1
            k = len(node.children)
            work, span = self.cost.fork(k) if kind is TaskKind.FORK else self.cost.parallel_for(k)
            longest = peak = live = 0
            for child in node.children:
                w, s, p, n = self.visit(child)
                work += w
                longest = max(longest, s)
                peak += max(p, 0)
                live += n
            return work, span + longest, peak, live
        assert node.buffer is not None
        buffer = node.buffer
        charge = self.cost.alloc(buffer.size)
        if kind is TaskKind.ALLOC:
            self.allocated.add(buffer.id)
            if self.execute:
                buffer.allocate()
            return charge, charge, buffer.size, buffer.size
        if self.execute:
            buffer.release()
        return charge, charge, 0, -buffer.size

    def _leaf(self, node: TaskNode) -> tuple[int, int, int, int]:
        action = node.action
        assert action is not None
        for view in action.inputs:
            self.read[view.buffer.id] = view.buffer
        for view in action.outputs:
            self.written[view.buffer.id] = view.buffer
        if self.execute:
            action.execute()
        if self.record_trace:
            self.traces.append(action.trace())
        self.leaves += 1
        self.mult_adds += node.mult_adds
        unit = self.cost.leaf_unit
        return node.work * unit, node.span * unit, 0, 0

    def resident(self, buffers: dict[int, Buffer]) -> int:
        return sum(b.size for key, b in buffers.items() if key not in self.allocated)

    def trace(self) -> NDArray:
        if not self.traces:
            return np.empty(0, dtype=TRACE_DTYPE)
        return normalize_buffer_ids(np.concatenate(self.traces))


def normalize_buffer_ids(trace: NDArray) -> NDArray:
    """Renumber buffers densely in order of first access."""
    if trace.size == 0:
        return trace
    ids, first = np.unique(trace["buffer"], return_index=True)
    ranks = np.empty(ids.size, dtype=ids.dtype)
    ranks[np.argsort(first)] = np.arange(ids.size, dtype=ids.dtype)
    out = trace.copy()
    out["buffer"] = ranks[np.searchsorted(ids, trace["buffer"])]
    return out


def run_instrumented(
    root: TaskNode,
    cost: Optional[CostModel] = None,
    *,
    execute: bool = True,
    record_trace: bool = False,
) -> InstrumentedRun:
    """Execute a task tree serially and measure it.

    Args:
        root: Task tree to run
        cost: Unit costs (defaults to all-ones)
        execute: Run leaf bodies; False only costs the tree
        record_trace: Collect the ordered (buffer, index, rw) access trace

    Returns:
        InstrumentedRun with exact T1, Tinf, Sinf under the cost model

    Example:
        >>> run = run_instrumented(mm(x, u, v, KernelConfig(base=1)))
        >>> run.metrics.mult_adds
    """
    instrumenter = _Instrumenter(cost or CostModel(), execute, record_trace)
    work, span, peak, _ = instrumenter.visit(root)
    peak = max(peak, 0)
    everything = {**instrumenter.read, **instrumenter.written}
    metrics = ExecMetrics(
        work=work,
        span=span,
        peak_space=instrumenter.resident(everything) + peak,
        forks=instrumenter.forks,
        mult_adds=instrumenter.mult_adds,
        peak_workspace=instrumenter.resident(instrumenter.written) + peak,
        leaf_count=instrumenter.leaves,
    )
    logger.debug(
        "%s: T1=%d Tinf=%d Sinf=%d forks=%d leaves=%d",
        root.label or root.kind.value,
        metrics.work,
        metrics.span,
        metrics.peak_space,
        metrics.forks,
        metrics.leaf_count,
    )
    return InstrumentedRun(metrics, instrumenter.trace() if record_trace else None)


def collect_leaves(root: TaskNode, label: Optional[str] = None) -> list[TaskNode]:
    """Leaves of a tree in execution order, optionally filtered by label."""
    return [leaf for leaf in root.leaves() if label is None or leaf.label == label]
