from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class LossBreakdown:
    """
    Unweighted term values (sum over pairs, pair weights applied) and the
    weighted total. per_expression holds each pair's weighted contribution,
    gamma_eps excluded.
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma_eps: float
    spurious: list[float] = field(default_factory=list)
    per_expression: dict[str, float] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)
    total: float = 0.0

    def weighted_terms(self) -> dict[str, float]:
        terms = {
            "gamma1": self.weights.get("gamma1", 0.0) * self.gamma1,
            "gamma2": self.weights.get("gamma2", 0.0) * self.gamma2,
            "gamma3": self.weights.get("gamma3", 0.0) * self.gamma3,
            "gamma_eps": self.weights.get("gamma_eps", 0.0) * self.gamma_eps,
        }
        for i, value in enumerate(self.spurious):
            terms[f"spurious_{i}"] = self.weights.get(f"spurious_{i}", 0.0) * value
        return terms

    def recompute_total(self) -> float:
        return sum(self.weighted_terms().values())

    @property
    def gamma_sum(self) -> float:
        return self.gamma1 + self.gamma2 + self.gamma3

    def term_columns(self) -> dict[str, float]:
        columns = {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma_eps": self.gamma_eps,
        }
        for i, value in enumerate(self.spurious):
            columns[f"spurious_{i}"] = value
        columns["total"] = self.total
        return columns

    def to_dict(self) -> dict:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma_eps": self.gamma_eps,
            "spurious": list(self.spurious),
            "per_expression": dict(self.per_expression),
            "weights": dict(self.weights),
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, content: dict) -> LossBreakdown:
        return cls(**content)
