from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from rig_tuner.objectives import LossBreakdown
from rig_tuner.utils.file_access import csv_cell


@dataclass
class IterationRecord:
    iteration: int
    loss: LossBreakdown
    grad_norm: float
    step: float = 0.0
    lvhat: float | None = None
    dvhat_norm: float | None = None


@dataclass
class TrajectorySample:
    """
    theta snapshot with the tracker controls of every pair at that theta,
    enough to re-plot control-space trajectories.
    """

    sample_id: int
    iteration: int
    theta: NDArray
    total: float
    controls: list[NDArray] = field(default_factory=list)


@dataclass
class OptimizationReport:
    theta_init: NDArray
    theta_final: NDArray
    trace: list[IterationRecord]
    trajectory: list[TrajectorySample]
    final_loss: LossBreakdown
    iterations: int
    stop_reason: str
    evaluation_count: int = 0
    chosen_theta: NDArray | None = None
    chosen_sample: int | None = None
    supervision_scores: list[float] = field(default_factory=list)
    pair_names: list[str] = field(default_factory=list)
    wall_clock: float = 0.0

    def __post_init__(self):
        if self.chosen_theta is None:
            self.chosen_theta = self.theta_final

    @property
    def initial_loss(self) -> LossBreakdown:
        return self.trace[0].loss if self.trace else self.final_loss

    def converged_iteration(self, threshold: float) -> int | None:
        """First iteration whose total loss is at or below threshold."""
        for record in self.trace:
            if record.loss.total <= threshold:
                return record.iteration
        if self.final_loss.total <= threshold:
            return self.iterations
        return None

    def mean_lvhat(self, window: int | None = None) -> float | None:
        """Mean dv_hat/dtheta error over the first window iterations (all by default)."""
        values = [r.lvhat for r in self.trace[:window] if r.lvhat is not None]
        return float(np.mean(values)) if values else None

    def mean_dvhat_norm(self, window: int | None = None) -> float | None:
        values = [r.dvhat_norm for r in self.trace[:window] if r.dvhat_norm is not None]
        return float(np.mean(values)) if values else None

    def write_trace_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        columns = list(self.final_loss.term_columns())
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", *columns, "grad_norm", "step"])
            for record in self.trace:
                terms = record.loss.term_columns()
                writer.writerow(
                    [
                        record.iteration,
                        *(csv_cell(terms[c]) for c in columns),
                        csv_cell(record.grad_norm),
                        csv_cell(record.step),
                    ]
                )
        return path

    def trajectory_table(self) -> tuple[list[str], list[list[str]]]:
        """Header and rows of the trajectory dump, one row per sample."""
        n_params = self.theta_init.shape[0]
        header = ["sample_id", "iteration", "total"]
        header += [f"theta_{i}" for i in range(n_params)]
        if self.trajectory and self.trajectory[0].controls:
            for name, c in zip(self.pair_names, self.trajectory[0].controls, strict=True):
                header += [f"c[{name}]_{j}" for j in range(c.shape[0])]

        rows = []
        for sample in self.trajectory:
            row = [str(sample.sample_id), str(sample.iteration), csv_cell(sample.total)]
            row += [csv_cell(x) for x in sample.theta]
            for c in sample.controls:
                row += [csv_cell(x) for x in c]
            rows.append(row)
        return header, rows

    def write_trajectory_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header, rows = self.trajectory_table()
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
        return path

    def to_dict(self) -> dict:
        """Deterministic summary; wall-clock time is left out."""
        return {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "evaluation_count": self.evaluation_count,
            "initial_loss": self.initial_loss.to_dict(),
            "final_loss": self.final_loss.to_dict(),
            "chosen_sample": self.chosen_sample,
            "supervision_scores": list(self.supervision_scores),
            "theta_final": self.theta_final.tolist(),
            "chosen_theta": self.chosen_theta.tolist(),
        }
