"""Tests for the LRU ideal-cache simulator."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridkernels.domain.errors import TraceFormatError
from hybridkernels.domain.models import CacheConfig
from hybridkernels.domain.ring import ModularRing
from hybridkernels.engine.instrumented import run_instrumented
from hybridkernels.engine.tasks import TRACE_DTYPE
from hybridkernels.kernels.config import KernelConfig
from hybridkernels.services.cache_sim import LRUCache, distinct_lines, simulate
from hybridkernels.services.workloads import build_workload


def _trace(accesses):
    """Build a trace from (buffer, index) pairs, all reads."""
    records = np.zeros(len(accesses), dtype=TRACE_DTYPE)
    for slot, (buffer, index) in enumerate(accesses):
        records[slot]["buffer"] = buffer
        records[slot]["index"] = index
    return records


def _mm_trace(n, base):
    workload = build_workload(
        "mm", {"n": n}, ModularRing(), np.random.default_rng(0), KernelConfig(base=base)
    )
    return run_instrumented(workload.tree, execute=False, record_trace=True).trace


class TestLRUCache:
    """Tests for the LRU line set."""

    def test_hit_after_miss(self):
        """The second touch of a line hits."""
        cache = LRUCache(2)
        assert cache.access(1) is False
        assert cache.access(1) is True

    def test_evicts_least_recent(self):
        """A third line evicts the least recently used one."""
        cache = LRUCache(2)
        cache.access(1)
        cache.access(2)
        cache.access(1)
        cache.access(3)

        assert len(cache) == 2
        assert cache.access(1) is True
        assert cache.access(2) is False

    def test_needs_one_line(self):
        """An empty cache is rejected."""
        with pytest.raises(ValueError):
            LRUCache(0)


class TestSimulate:
    """Tests for simulate()."""

    def test_same_line_is_one_miss(self):
        """Accesses within one line of one buffer miss once."""
        stats = simulate(_trace([(1, 0), (1, 1), (1, 7), (1, 3)]), CacheConfig(64, 8))

        assert stats.accesses == 4
        assert stats.misses == 1
        assert stats.hits == 3

    def test_buffers_do_not_share_lines(self):
        """Equal indices in different buffers are different lines."""
        stats = simulate(_trace([(1, 0), (2, 0)]), CacheConfig(64, 8))
        assert stats.misses == 2

    def test_capacity_misses(self):
        """Cycling over more lines than fit misses on every access."""
        accesses = [(1, 4 * i) for i in range(3)] * 3
        stats = simulate(_trace(accesses), CacheConfig(8, 4, tall_cache=False))

        assert stats.misses == 9
        assert stats.distinct_lines == 3

    def test_empty_trace(self):
        """An empty trace has no misses."""
        stats = simulate(np.zeros(0, dtype=TRACE_DTYPE), CacheConfig(64, 8))
        assert (stats.accesses, stats.misses, stats.miss_ratio) == (0, 0, 0.0)

    def test_wrong_dtype(self):
        """Only TRACE_DTYPE records are accepted."""
        with pytest.raises(TraceFormatError):
            simulate(np.zeros(4, dtype=np.int64), CacheConfig(64, 8))

    @given(
        st.lists(
            st.tuples(st.integers(1, 3), st.integers(0, 255)), min_size=1, max_size=200
        ),
        st.sampled_from([1, 2, 4, 8]),
    )
    def test_compulsory_floor(self, accesses, line_size):
        """Misses never fall below the number of distinct lines."""
        trace = _trace(accesses)
        stats = simulate(trace, CacheConfig(16 * line_size, line_size, tall_cache=False))

        assert stats.distinct_lines == distinct_lines(trace, line_size)
        assert stats.distinct_lines <= stats.misses <= stats.accesses

    def test_as_dict(self):
        """as_dict carries the derived hit count and miss ratio."""
        row = simulate(_trace([(1, 0), (1, 0)]), CacheConfig(64, 8)).as_dict()
        assert row["hits"] == 1
        assert row["miss_ratio"] == 0.5


class TestKernelTraces:
    """Q1 of recorded kernel traces."""

    def test_problem_that_fits_pays_compulsory_misses_only(self):
        """With the whole problem resident only cold misses remain."""
        trace = _mm_trace(16, 4)
        small = simulate(trace, CacheConfig(256, 4))
        large = simulate(trace, CacheConfig(1024, 4))

        assert large.misses == large.distinct_lines
        assert small.misses > large.misses

    @pytest.mark.slow
    def test_larger_cache_scales_misses(self):
        """Quadrupling M roughly halves Q1 of mm (Q1 ~ n^3 / (B sqrt(M)))."""
        trace = _mm_trace(64, 8)
        small = simulate(trace, CacheConfig(512, 8))
        large = simulate(trace, CacheConfig(2048, 8))

        assert 1.4 <= small.misses / large.misses <= 2.6
