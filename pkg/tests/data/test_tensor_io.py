"""Tests for binary tensor files."""

import numpy as np
import pytest

from hybridkernels.data.tensor_io import HEADER_DTYPE, read_header, read_tensor, write_tensor
from hybridkernels.domain.errors import TraceFormatError
from hybridkernels.domain.ring import ScalarMode


class TestTensorFiles:
    """Tests for write_tensor/read_tensor."""

    def test_header_is_ten_bytes(self):
        assert HEADER_DTYPE.itemsize == 10

    def test_round_trip_int(self, tmp_path, make_tensor):
        """Integer tensors come back bit-exact."""
        path = tmp_path / "t.bin"
        tensor = make_tensor(3, 4)
        write_tensor(path, tensor)

        assert path.stat().st_size == 10 + 64 * 8
        loaded = read_tensor(path)
        assert loaded.ring.mode is ScalarMode.INT
        assert np.array_equal(loaded.to_numpy(), tensor.to_numpy())

    def test_round_trip_float(self, tmp_path, make_tensor, f64_ring):
        """Float tensors keep their scalar mode."""
        path = tmp_path / "t.bin"
        write_tensor(path, make_tensor(2, 2, ring=f64_ring))

        header = read_header(path)
        assert (header.order, header.side, header.mode) == (2, 2, ScalarMode.F64)
        assert header.elements == 4

    def test_writes_views(self, tmp_path, make_tensor):
        """An orthant view is written as its own dense tensor."""
        path = tmp_path / "t.bin"
        tensor = make_tensor(2, 4)
        write_tensor(path, tensor.orthant((2, 1)))

        assert np.array_equal(read_tensor(path).to_numpy(), tensor.to_numpy()[2:, :2])

    def test_truncated_payload(self, tmp_path, make_tensor):
        """A payload shorter than the header promises is rejected."""
        path = tmp_path / "t.bin"
        write_tensor(path, make_tensor(2, 4))
        path.write_bytes(path.read_bytes()[:-8])

        with pytest.raises(TraceFormatError):
            read_tensor(path)

    def test_short_header(self, tmp_path):
        """Files shorter than the header are rejected."""
        path = tmp_path / "t.bin"
        path.write_bytes(b"\x02\x04")

        with pytest.raises(TraceFormatError):
            read_header(path)

    def test_bad_mode(self, tmp_path):
        """Unknown scalar mode codes are rejected."""
        path = tmp_path / "t.bin"
        path.write_bytes(np.array([(1, 2, 9)], dtype=HEADER_DTYPE).tobytes() + bytes(16))

        with pytest.raises(TraceFormatError):
            read_tensor(path)
