"""Tests for CSV export."""

import io

from hybridkernels.services.export import CSVExporter


class TestCSVExporter:
    """Tests for CSVExporter."""

    def test_stream(self):
        """Rows are written with a header and \\n line ends."""
        out = io.StringIO()
        CSVExporter().export([{"r": 1, "span": 152}, {"r": 2, "span": 93}], out)
        assert out.getvalue() == "r,span\n1,152\n2,93\n"

    def test_fieldnames_order_and_missing(self):
        """Given columns set the order; absent values are blank."""
        out = io.StringIO()
        CSVExporter().export([{"b": 2, "a": 1}], out, fieldnames=["a", "b", "c"])
        assert out.getvalue() == "a,b,c\n1,2,\n"

    def test_path_creates_parents(self, tmp_path):
        """Writing to a path creates missing directories."""
        target = tmp_path / "nested" / "rows.csv"
        CSVExporter().export([{"kernel": "mm"}], target)
        assert target.read_text(encoding="utf-8") == "kernel\nmm\n"

    def test_empty(self):
        """No rows and no columns writes an empty header line."""
        out = io.StringIO()
        CSVExporter().export([], out)
        assert out.getvalue() == "\n"

    def test_extension(self):
        assert CSVExporter().get_extension() == "csv"
