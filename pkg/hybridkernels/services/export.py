"""Export service for writing result tables to files."""

import csv
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Optional, TextIO


class ExportStrategy(ABC):
    """Abstract base class for table export strategies."""

    @abstractmethod
    def export(
        self,
        rows: Sequence[Mapping[str, Any]],
        output: Path | TextIO,
        fieldnames: Optional[Sequence[str]] = None,
    ) -> None:
        """Export rows to a file or an open text stream.

        Args:
            rows: Table rows keyed by column name
            output: Destination path or stream
            fieldnames: Column order; defaults to the keys of the first row
        """

    @abstractmethod
    def get_extension(self) -> str:
        """Get file extension for this format."""


class CSVExporter(ExportStrategy):
    """Comma-separated values with a header row and \\n line ends.

    Output is byte-stable: columns keep the given order and floats are
    formatted by the row producers.
    """

    def export(
        self,
        rows: Sequence[Mapping[str, Any]],
        output: Path | TextIO,
        fieldnames: Optional[Sequence[str]] = None,
    ) -> None:
        if fieldnames is None:
            fieldnames = list(rows[0].keys()) if rows else []
        if isinstance(output, Path):
            output.parent.mkdir(parents=True, exist_ok=True)
            with output.open("w", newline="", encoding="utf-8") as f:
                self._write(rows, f, fieldnames)
        else:
            self._write(rows, output, fieldnames)

    @staticmethod
    def _write(rows: Sequence[Mapping[str, Any]], f: TextIO, fieldnames: Sequence[str]) -> None:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({name: row.get(name, "") for name in fieldnames})

    def get_extension(self) -> str:
        return "csv"
