"""Parameter sweeps producing CSV rows: wall-clock benchmarks and cache scans."""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.models import CacheConfig
from hybridkernels.domain.ring import Ring
from hybridkernels.engine.instrumented import CostModel, run_instrumented
from hybridkernels.engine.parallel import run_parallel
from hybridkernels.kernels.config import DEFAULT_CONFIG, KernelConfig
from hybridkernels.services.cache_sim import simulate
from hybridkernels.services.workloads import build_workload

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class BenchRow:
    """Best-of-repeats wall time for one thread count."""

    kernel: str
    params: str
    threads: int
    seconds: float
    speedup: float

    def as_row(self) -> dict[str, Any]:
        return {
            "kernel": self.kernel,
            "params": self.params,
            "threads": self.threads,
            "seconds": f"{self.seconds:.6f}",
            "speedup": f"{self.speedup:.3f}",
        }


@dataclass(frozen=True, slots=True)
class CacheScanRow:
    """Simulated misses for one cache geometry."""

    kernel: str
    params: str
    capacity: int
    line_size: int
    accesses: int
    misses: int
    distinct_lines: int

    def as_row(self) -> dict[str, Any]:
        return {
            "kernel": self.kernel,
            "params": self.params,
            "M": self.capacity,
            "B": self.line_size,
            "accesses": self.accesses,
            "Q1": self.misses,
            "distinct_lines": self.distinct_lines,
        }


def _describe(params: Mapping[str, Any]) -> str:
    return " ".join(f"{key}={value}" for key, value in params.items())


def thread_sweep(limit: int) -> list[int]:
    """Powers of two below ``limit``, then ``limit`` itself."""
    if limit < 1:
        raise ValueError(f"thread limit must be positive, got {limit}")
    return [1 << e for e in range(limit.bit_length()) if 1 << e < limit] + [limit]


def benchmark(
    kernel: str,
    params: Mapping[str, Any],
    thread_counts: Sequence[int],
    ring: Ring,
    config: KernelConfig = DEFAULT_CONFIG,
    *,
    seed: int = 42,
    repeats: int = 3,
    check_races: bool = True,
) -> list[BenchRow]:
    """Time run_parallel for each thread count.

    A fresh workload is built for every repeat so accumulating kernels
    always start from zeroed outputs.

    Args:
        kernel: Kernel name understood by build_workload
        params: Kernel parameters
        thread_counts: Thread budgets to sweep
        ring: Scalar ring (float64 for timing runs)
        config: Kernel thresholds
        seed: Operand seed
        repeats: Runs per thread count; the fastest is kept
        check_races: Race-check each tree before running it

    Returns:
        One row per thread count; speedup is relative to the first
    """
    rows: list[BenchRow] = []
    baseline: Optional[float] = None
    for threads in thread_counts:
        best = float("inf")
        used: Mapping[str, Any] = params
        for _ in range(max(repeats, 1)):
            workload = build_workload(kernel, params, ring, np.random.default_rng(seed), config)
            used = workload.params
            best = min(best, run_parallel(workload.tree, threads, check_races=check_races))
        baseline = baseline if baseline is not None else best
        speedup = baseline / best if best > 0 else 0.0
        rows.append(BenchRow(kernel, _describe(used), threads, best, speedup))
        logger.info("bench %s threads=%d: %.6fs", kernel, threads, best)
    return rows


def scan_trace(
    trace: NDArray,
    capacities: Sequence[int],
    line_size: int,
    *,
    source: str = "trace",
    params: str = "",
    tall_cache: bool = True,
) -> list[CacheScanRow]:
    """Simulate Q1 of a recorded trace for several cache capacities.

    Args:
        trace: Access records, as from run_instrumented or read_trace
        capacities: Cache sizes M to simulate
        line_size: Line size B shared by every row
        source: Kernel name or file the trace came from
        params: Parameter description for the rows
        tall_cache: Enforce M >= B^2

    Returns:
        One row per capacity in the order given
    """
    rows = []
    for capacity in capacities:
        stats = simulate(trace, CacheConfig(capacity, line_size, tall_cache=tall_cache))
        rows.append(
            CacheScanRow(
                kernel=source,
                params=params,
                capacity=capacity,
                line_size=line_size,
                accesses=stats.accesses,
                misses=stats.misses,
                distinct_lines=stats.distinct_lines,
            )
        )
        logger.info("scan %s M=%d B=%d: Q1 %d", source, capacity, line_size, stats.misses)
    return rows


def cache_scan(
    kernel: str,
    params: Mapping[str, Any],
    capacities: Sequence[int],
    line_size: int,
    ring: Ring,
    config: KernelConfig = DEFAULT_CONFIG,
    cost: Optional[CostModel] = None,
    *,
    seed: int = 42,
    tall_cache: bool = True,
) -> list[CacheScanRow]:
    """Simulate Q1 of one kernel trace for several cache capacities.

    The trace is recorded once; leaf bodies are not executed.
    """
    workload = build_workload(kernel, params, ring, np.random.default_rng(seed), config)
    run = run_instrumented(workload.tree, cost, execute=False, record_trace=True)
    assert run.trace is not None
    return scan_trace(
        run.trace,
        capacities,
        line_size,
        source=workload.kernel,
        params=_describe(workload.params),
        tall_cache=tall_cache,
    )
