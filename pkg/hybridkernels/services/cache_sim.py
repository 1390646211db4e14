"""Ideal-cache simulation: fully associative LRU over an access trace.

Element addresses are (buffer id, index) pairs; a line is B consecutive
indices of one buffer. Reads and writes cost the same.
"""

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.errors import TraceFormatError
from hybridkernels.domain.models import CacheConfig
from hybridkernels.engine.tasks import TRACE_DTYPE

logger = logging.getLogger(__name__)

_LINE_BITS = 40


@dataclass(frozen=True, slots=True)
class CacheStats:
    """Outcome of one simulation."""

    accesses: int
    misses: int
    distinct_lines: int  # compulsory misses
    capacity: int
    line_size: int

    @property
    def hits(self) -> int:
        return self.accesses - self.misses

    @property
    def miss_ratio(self) -> float:
        return self.misses / self.accesses if self.accesses else 0.0

    def as_dict(self) -> dict[str, int | float]:
        row: dict[str, int | float] = dict(asdict(self))
        row["hits"] = self.hits
        row["miss_ratio"] = round(self.miss_ratio, 6)
        return row


def _check_trace(trace: NDArray) -> None:
    if trace.dtype != TRACE_DTYPE:
        raise TraceFormatError("Unexpected trace record layout", str(trace.dtype))


def line_keys(trace: NDArray, line_size: int) -> NDArray:
    """Packed (buffer, line) key of every access."""
    _check_trace(trace)
    buffers = trace["buffer"].astype(np.uint64) << np.uint64(_LINE_BITS)
    return buffers | (trace["index"] // np.uint64(line_size))


def distinct_lines(trace: NDArray, line_size: int) -> int:
    """Number of different lines the trace touches."""
    return int(np.unique(line_keys(trace, line_size)).size)


class LRUCache:
    """M/B lines, evicting the least recently used.

    The OrderedDict keeps lines in recency order, most recent last.
    """

    def __init__(self, lines: int):
        if lines < 1:
            raise ValueError(f"cache needs at least one line, got {lines}")
        self.lines = lines
        self._resident: OrderedDict[int, None] = OrderedDict()

    def access(self, key: int) -> bool:
        """Touch a line; return True on a hit."""
        if key in self._resident:
            self._resident.move_to_end(key)
            return True
        self._resident[key] = None
        if len(self._resident) > self.lines:
            self._resident.popitem(last=False)
        return False

    def __len__(self) -> int:
        return len(self._resident)


def simulate(trace: NDArray, config: CacheConfig) -> CacheStats:
    """Replay a trace through an LRU cache of ``config.lines`` lines.

    Args:
        trace: TRACE_DTYPE records in program order
        config: Cache geometry

    Returns:
        CacheStats with the miss count Q and the compulsory-miss floor
    """
    keys = line_keys(trace, config.line_size)
    accesses = int(keys.size)
    if accesses == 0:
        return CacheStats(0, 0, 0, config.capacity, config.line_size)
    # an access to the line touched just before is always a hit
    runs = keys[np.concatenate(([True], keys[1:] != keys[:-1]))]
    cache = LRUCache(config.lines)
    misses = sum(1 for key in runs.tolist() if not cache.access(key))
    stats = CacheStats(
        accesses=accesses,
        misses=misses,
        distinct_lines=int(np.unique(runs).size),
        capacity=config.capacity,
        line_size=config.line_size,
    )
    logger.debug(
        "LRU M=%d B=%d: %d accesses, %d misses", config.capacity, config.line_size, accesses, misses
    )
    return stats
