"""
Acceptance thresholds of every repro target, one table for the whole package.
Bump THRESHOLDS_VERSION whenever a bound changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

THRESHOLDS_VERSION = 2


class Comparison(Enum):
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    REL_WITHIN = "within"


@dataclass(frozen=True)
class Threshold:
    """
    Bound on one (row, column) cell of a repro result. REL_WITHIN compares the
    relative deviation from reference against bound.
    """

    row: str
    column: str
    comparison: Comparison
    bound: float
    reference: float | None = None

    def holds(self, value: float) -> bool:
        if not math.isfinite(value):
            return False
        if self.comparison == Comparison.REL_WITHIN:
            return abs(value - self.reference) <= self.bound * abs(self.reference)
        return {
            Comparison.LT: value < self.bound,
            Comparison.LE: value <= self.bound,
            Comparison.GT: value > self.bound,
            Comparison.GE: value >= self.bound,
        }[self.comparison]

    def describe(self) -> str:
        if self.comparison == Comparison.REL_WITHIN:
            return f"within {self.bound:.0%} of {self.reference:.3e}"
        return f"{self.comparison.value} {self.bound:.3e}"


def _cells(comparison: Comparison, bound: float, *cells: tuple[str, str]) -> list[Threshold]:
    return [Threshold(row, column, comparison, bound) for row, column in cells]


LE, LT, GT, GE = Comparison.LE, Comparison.LT, Comparison.GT, Comparison.GE

THRESHOLDS: dict[str, list[Threshold]] = {
    "table1": [
        Threshold("Direct", "L_D", LE, 1e-10),
        *_cells(LE, 1e-6, ("gamma1 only", "L_D"), ("gamma2 only", "L_D")),
        *_cells(LE, 1e-6, ("gamma1 only", "L_gamma_sum"), ("gamma2 only", "L_gamma_sum")),
        *_cells(LE, 1e-6, ("gamma1 only", "err_A"), ("gamma2 only", "err_A")),
    ],
    "table2": [
        *_cells(LE, 1e-6, ("gamma1 & gamma_eps", "err_A"), ("gamma2 & gamma_eps", "err_A")),
        *_cells(GT, 1.0, ("gamma1 only", "err_A"), ("gamma2 only", "err_A")),
        Threshold("gamma1 only", "L_gamma1", LE, 1e-6),
        Threshold("gamma2 only", "L_gamma2", LE, 1e-6),
    ],
    "table3": [
        Threshold("Direct", "L_D", Comparison.REL_WITHIN, 0.02, reference=6.60e-4),
        Threshold("gamma2 only", "L_gamma2", LE, 1e-6),
        Threshold("gamma2 only", "err_A", LE, 1e-6),
        Threshold("gamma1 only", "err_A4", LE, 1e-6),
    ],
    "table4": [
        Threshold("gamma2 & gamma_eps", "err_A", LE, 1e-6),
        Threshold("gamma1 & gamma_eps", "err_A2star", LE, 1e-3),
    ],
    "table5": [Threshold("dvhat / none", "iters_ratio", LE, 1.2)],
    "table6": [Threshold("dvhat / none", "iters_ratio", LE, 0.5)],
    "table7": [
        Threshold("10 random / 1 random", "mu_lvhat_ratio", LT, 1.0),
        Threshold("100 random / 10 random", "mu_lvhat_ratio", LT, 1.0),
        Threshold("steepest descent / 1 random", "iters_ratio", LT, 1.0),
    ],
    "table8": [
        Threshold("10 random / 1 random", "mu_lvhat_ratio", LT, 1.0),
        Threshold("100 random / 10 random", "mu_lvhat_ratio", LT, 1.0),
    ],
    "fig1": [
        Threshold("final", "abs_a_hat", GT, 1e3),
        Threshold("final", "c", GT, -1e-2),
        Threshold("trajectory", "max_c", LT, 0.0),
    ],
    "fig2": [
        Threshold("final", "min_abs_a_hat", GT, 1e3),
        Threshold("final", "max_abs_c", LT, 1e-2),
    ],
    "fig3": [Threshold("final", "c_error", LT, 1e-3)],
    "fig7": [
        *_cells(GE, 10.0, ("t1", "low_edge_over_min"), ("t2", "low_edge_over_min")),
        Threshold("t2", "high_edge_over_min", GE, 10.0),
        Threshold("t1", "high_edge_over_min", LT, 10.0),
        *_cells(GE, 1e-5, ("t1", "argmin_s"), ("t2", "argmin_s")),
        Threshold("t2", "argmin_s", LE, 1e0),
    ],
}
