"""Binary tensor files.

Layout: a 10-byte header (u8 order, little-endian u64 side, u8 scalar
mode) followed by side^order row-major little-endian elements, int64 for
integer mode and float64 otherwise.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hybridkernels.domain.errors import TraceFormatError
from hybridkernels.domain.ring import Ring, ScalarMode, ring_for
from hybridkernels.domain.tensors import Tensor, is_power_of_two

logger = logging.getLogger(__name__)

HEADER_DTYPE = np.dtype([("order", "u1"), ("side", "<u8"), ("mode", "u1")])
_MODE_CODES = {ScalarMode.INT: 0, ScalarMode.F64: 1}
_PAYLOAD_DTYPES = {ScalarMode.INT: np.dtype("<i8"), ScalarMode.F64: np.dtype("<f8")}


@dataclass(frozen=True, slots=True)
class TensorHeader:
    order: int
    side: int
    mode: ScalarMode

    @property
    def elements(self) -> int:
        return int(self.side**self.order)

    @property
    def payload_bytes(self) -> int:
        return self.elements * _PAYLOAD_DTYPES[self.mode].itemsize


def _decode_header(raw: bytes, source: Path) -> TensorHeader:
    if len(raw) < HEADER_DTYPE.itemsize:
        raise TraceFormatError("Tensor file shorter than its header", str(source))
    record = np.frombuffer(raw[: HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    code = int(record["mode"])
    modes = {value: mode for mode, value in _MODE_CODES.items()}
    if code not in modes:
        raise TraceFormatError("Unknown scalar mode in tensor header", f"code {code}")
    side = int(record["side"])
    if not is_power_of_two(side):
        raise TraceFormatError("Tensor side must be a power of two", f"got {side}")
    return TensorHeader(int(record["order"]), side, modes[code])


def read_header(path: Path) -> TensorHeader:
    """Read only the header of a tensor file."""
    with path.open("rb") as f:
        return _decode_header(f.read(HEADER_DTYPE.itemsize), path)


def write_tensor(path: Path, tensor: Tensor) -> None:
    """Write a tensor in the binary format."""
    mode = tensor.ring.mode
    header = np.array([(tensor.order, tensor.side, _MODE_CODES[mode])], dtype=HEADER_DTYPE)
    payload = np.ascontiguousarray(tensor.to_numpy(), dtype=_PAYLOAD_DTYPES[mode])
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(header.tobytes())
        f.write(payload.tobytes())
    logger.debug("Wrote order-%d tensor of side %d to %s", tensor.order, tensor.side, path)


def read_tensor(path: Path, ring: Ring | None = None) -> Tensor:
    """Load a tensor; the ring defaults to the one named in the header.

    Raises:
        TraceFormatError: If the header is malformed or the payload is short
    """
    raw = path.read_bytes()
    header = _decode_header(raw, path)
    body = raw[HEADER_DTYPE.itemsize :]
    if len(body) != header.payload_bytes:
        raise TraceFormatError(
            "Tensor payload length does not match its header",
            f"expected {header.payload_bytes} bytes, found {len(body)}",
        )
    values = np.frombuffer(body, dtype=_PAYLOAD_DTYPES[header.mode])
    ring = ring or ring_for(header.mode)
    return Tensor.from_array(values.reshape((header.side,) * header.order), ring)
