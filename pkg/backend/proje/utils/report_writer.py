"""CSV sinks for per-epoch curves, evaluation reports and sweeps."""

import csv
import logging
from typing import List, Optional, Protocol

logger = logging.getLogger(__name__)


class CsvRow(Protocol):
    CSV_COLUMNS: List[str]

    def csv_row(self) -> List[str]: ...


class CsvReportWriter:
    """Append rows to a CSV file, header first, flushing after every row.

    Use as a context manager; the instance is itself a valid report sink
    (call it with a row object).
    """

    def __init__(self, path: str, columns: List[str]):
        self.path = path
        self.columns = columns
        self._file = None
        self._writer: Optional[csv.writer] = None

    def __enter__(self) -> "CsvReportWriter":
        self._file = open(self.path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.columns)
        return self

    def __exit__(self, *exc) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
            logger.info("Wrote %s", self.path)

    def __call__(self, row: CsvRow) -> None:
        if self._writer is None:
            raise RuntimeError("CsvReportWriter used outside its context")
        self._writer.writerow(row.csv_row())
        self._file.flush()


def write_rows(path: str, rows: List[CsvRow], columns: List[str]) -> None:
    with CsvReportWriter(path, columns) as sink:
        for row in rows:
            sink(row)
