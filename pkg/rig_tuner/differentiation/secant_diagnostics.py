from __future__ import annotations

import csv
import threading
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from rig_tuner.utils.file_access import csv_cell


@dataclass(frozen=True)
class SecantRecord:
    iteration: int
    expression: str
    direction: int
    s: float
    l_delta: float
    secant_residual: float


class SecantDiagnostics:
    """
    Thread-safe collector of per-update secant records. Rows are written
    sorted by (iteration, expression, direction) so that dumps do not depend on
    worker scheduling.
    """

    def __init__(self):
        self._records: list[SecantRecord] = []
        self._lock = threading.Lock()
        self.iteration = 0

    def record(
        self,
        expression: str,
        direction: int,
        s: float,
        l_delta: float,
        secant_residual: float,
    ) -> None:
        record = SecantRecord(
            self.iteration, expression, direction, float(s), float(l_delta), float(secant_residual)
        )
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> list[SecantRecord]:
        with self._lock:
            return sorted(self._records, key=lambda r: (r.iteration, r.expression, r.direction))

    def __len__(self):
        return len(self._records)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([f.name for f in fields(SecantRecord)])
            for record in self.records:
                writer.writerow([csv_cell(v) for v in astuple(record)])
        return path
