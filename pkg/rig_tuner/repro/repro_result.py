from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from rig_tuner.utils.file_access import csv_cell

from .thresholds import THRESHOLDS_VERSION, Threshold

Cell = tuple[str, str]


@dataclass(frozen=True)
class ReproSettings:
    """
    seed drives every random direction draw, jobs the worker pool of each run.
    quality_window is the number of leading iterations averaged for the
    dv_hat/dtheta quality columns.
    """

    seed: int = 0
    jobs: int = 1
    quality_window: int = 200


@dataclass
class CsvTable:
    header: list[str]
    rows: list[list[str]]

    @classmethod
    def from_cells(
        cls, cells: dict[Cell, float], rows: list[str], columns: list[str], label: str = ""
    ) -> CsvTable:
        """One row per label, blank where a row has no value for a column."""
        body = []
        for row in rows:
            values = [cells.get((row, column)) for column in columns]
            body.append([row, *("" if v is None else csv_cell(v) for v in values)])
        return cls([label, *columns], body)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.header)
            writer.writerows(self.rows)
        return path


@dataclass(frozen=True)
class CellFailure:
    target: str
    threshold: Threshold
    value: float | None

    def describe(self) -> str:
        cell = f"{self.target}[{self.threshold.row!r}, {self.threshold.column!r}]"
        if self.value is None:
            return f"{cell}: missing, expected {self.threshold.describe()}"
        return f"{cell}: got {self.value:.6e}, expected {self.threshold.describe()}"


@dataclass
class ReproResult:
    target: str
    cells: dict[Cell, float] = field(default_factory=dict)
    tables: dict[str, CsvTable] = field(default_factory=dict)
    failures: list[CellFailure] = field(default_factory=list)
    thresholds: list[Threshold] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, thresholds: list[Threshold]) -> list[CellFailure]:
        self.thresholds = list(thresholds)
        self.failures = []
        for threshold in thresholds:
            value = self.cells.get((threshold.row, threshold.column))
            if value is None or not threshold.holds(value):
                self.failures.append(CellFailure(self.target, threshold, value))
        return self.failures

    def cell_table(self) -> CsvTable:
        bounds = {(t.row, t.column): t for t in self.thresholds}
        rows = []
        for (row, column), value in self.cells.items():
            threshold = bounds.get((row, column))
            rows.append(
                [
                    row,
                    column,
                    csv_cell(float(value)),
                    "" if threshold is None else threshold.describe(),
                    "" if threshold is None else str(threshold.holds(value)).lower(),
                ]
            )
        return CsvTable(["row", "column", "value", "bound", "passed"], rows)

    def write(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        paths = [table.write(directory / f"{name}.csv") for name, table in self.tables.items()]
        paths.append(self.cell_table().write(directory / f"{self.target}_cells.csv"))
        return paths

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "passed": self.passed,
            "thresholds_version": THRESHOLDS_VERSION,
            "tables": sorted(f"{name}.csv" for name in self.tables),
            "failures": [failure.describe() for failure in self.failures],
        }


def finite_or_nan(value: float | None) -> float:
    return math.nan if value is None else float(value)
