"""Binary access-trace files: packed (u32 buffer, u64 index, u8 rw) records."""

import logging
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.errors import TraceFormatError
from hybridkernels.engine.tasks import TRACE_DTYPE

logger = logging.getLogger(__name__)


def write_trace(path: Path, trace: NDArray) -> int:
    """Write trace records; return the number written."""
    if trace.dtype != TRACE_DTYPE:
        raise TraceFormatError("Unexpected trace record layout", str(trace.dtype))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(trace.tobytes())
    logger.debug("Wrote %d trace records to %s", trace.size, path)
    return int(trace.size)


def read_trace(path: Path) -> NDArray:
    """Load a trace file.

    Raises:
        TraceFormatError: If the file is not a whole number of records or
            holds an rw flag other than 0 and 1
    """
    raw = path.read_bytes()
    if len(raw) % TRACE_DTYPE.itemsize:
        raise TraceFormatError(
            "Trace file is not a whole number of records",
            f"{len(raw)} bytes, record size {TRACE_DTYPE.itemsize}",
        )
    trace = np.frombuffer(raw, dtype=TRACE_DTYPE).copy()
    if trace.size and int(trace["rw"].max()) > 1:
        raise TraceFormatError("Trace holds an unknown access kind", str(path))
    return trace
