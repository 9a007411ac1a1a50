from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from rig_tuner.calibration import ExpressionPair
from rig_tuner.rigs import IndexSet, Rig, RigParams
from rig_tuner.trackers import FilterMask
from rig_tuner.utils.errors import RigContractError
from rig_tuner.utils.file_access import reject_unknown_fields


class TrackerVariant(Enum):
    FULL = "full"
    FILTERED = "filtered"
    DECIMATED = "decimated"


class GeometryTarget(Enum):
    """
    rig recomputes v+ = R(c+; theta_R) from the pair controls, pair compares
    against the pair geometry itself (the linear examples, where the captured
    geometry may be inconsistent with the rig).
    """

    RIG = "rig"
    PAIR = "pair"


@dataclass
class SpuriousTerm:
    """
    Extra control term restricted to the given controls, outside each
    expression's own controls. target_zero drives them to zero, otherwise to
    the pair controls.
    """

    controls: list[int] | None = None
    weight: float = 1.0
    target_zero: bool = True

    def mask(self, pair: ExpressionPair, n_controls: int) -> FilterMask:
        if self.controls is None:
            selected = FilterMask.all_active(n_controls)
        else:
            selected = FilterMask.from_indices(self.controls, n_controls)
        return selected & FilterMask(pair.expression_controls()).complement()

    @classmethod
    def from_dict(cls, content: dict) -> SpuriousTerm:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        return {"controls": self.controls, "weight": self.weight, "target_zero": self.target_zero}


@dataclass
class ObjectiveConfig:
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 0.0
    gamma_eps: float = 1e-3
    gamma1_variant: TrackerVariant = TrackerVariant.FULL
    gamma2_variant: TrackerVariant = TrackerVariant.FULL
    gamma3_variant: TrackerVariant = TrackerVariant.FULL
    # Controls the filtered/decimated variants may keep (e.g. primary controls),
    # intersected with each expression's controls. None keeps every control.
    variant_controls: list[int] | None = None
    spurious_terms: list[SpuriousTerm] = field(default_factory=list)
    theta_R: NDArray | None = None
    active_theta: NDArray | None = None
    geometry_target: GeometryTarget = GeometryTarget.RIG

    def __post_init__(self):
        for name in ("gamma1_variant", "gamma2_variant", "gamma3_variant"):
            setattr(self, name, TrackerVariant(getattr(self, name)))
        self.geometry_target = GeometryTarget(self.geometry_target)
        self.spurious_terms = [
            term if isinstance(term, SpuriousTerm) else SpuriousTerm.from_dict(term)
            for term in self.spurious_terms
        ]

        weights = [self.gamma1, self.gamma2, self.gamma3, self.gamma_eps]
        weights += [term.weight for term in self.spurious_terms]
        if any(not np.isfinite(w) or w < 0 for w in weights):
            _error_msg = f"Objective weights must be finite and nonnegative, got {weights}"
            raise RigContractError(_error_msg)
        if not any(w > 0 for w in weights):
            _error_msg = "At least one objective weight must be positive"
            raise RigContractError(_error_msg)

        if self.theta_R is not None:
            self.theta_R = np.array(self.theta_R, dtype=np.float64)
        if self.active_theta is not None:
            self.active_theta = np.unique(np.asarray(self.active_theta, dtype=np.int64))

    def term_variants(self) -> dict[str, TrackerVariant]:
        """Variant of every weighted control or geometry term."""
        variants = {}
        if self.gamma1 > 0:
            variants["gamma1"] = self.gamma1_variant
        if self.gamma2 > 0:
            variants["gamma2"] = self.gamma2_variant
        if self.gamma3 > 0:
            variants["gamma3"] = self.gamma3_variant
        if any(term.weight > 0 for term in self.spurious_terms):
            variants["spurious"] = TrackerVariant.FULL
        return variants

    def required_variants(self) -> set[TrackerVariant]:
        """Variants needing derivatives."""
        return set(self.term_variants().values())

    def evaluated_variants(self) -> set[TrackerVariant]:
        """Variants tracked for reporting, weighted or not."""
        variants = {self.gamma1_variant, self.gamma2_variant, self.gamma3_variant}
        if self.spurious_terms:
            variants.add(TrackerVariant.FULL)
        return variants

    def uses_decimation(self) -> bool:
        return TrackerVariant.DECIMATED in self.evaluated_variants()

    def variant_mask(self, pair: ExpressionPair, n_controls: int) -> FilterMask:
        mask = FilterMask(pair.expression_controls())
        if self.variant_controls is not None:
            mask = mask & FilterMask.from_indices(self.variant_controls, n_controls)
        return mask

    def reference_theta(self, rig: Rig) -> RigParams:
        return rig.check_theta(self.theta_R)

    def active_indices(self, rig: Rig) -> IndexSet:
        if self.active_theta is None:
            return np.arange(rig.n_params)
        if self.active_theta.size and (
            self.active_theta[0] < 0 or self.active_theta[-1] >= rig.n_params
        ):
            _error_msg = f"Active parameters exceed the {rig.n_params} rig parameters"
            raise RigContractError(_error_msg)
        return self.active_theta

    def check(self, rig: Rig) -> ObjectiveConfig:
        self.reference_theta(rig)
        self.active_indices(rig)
        if self.variant_controls is not None and any(
            not 0 <= i < rig.n_controls for i in self.variant_controls
        ):
            _error_msg = f"Variant controls exceed the {rig.n_controls} rig controls"
            raise RigContractError(_error_msg)
        return self

    def replace(self, **changes) -> ObjectiveConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, content: dict) -> ObjectiveConfig:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma_eps": self.gamma_eps,
            "gamma1_variant": self.gamma1_variant.value,
            "gamma2_variant": self.gamma2_variant.value,
            "gamma3_variant": self.gamma3_variant.value,
            "variant_controls": self.variant_controls,
            "spurious_terms": [term.to_dict() for term in self.spurious_terms],
            "theta_R": None if self.theta_R is None else self.theta_R.tolist(),
            "active_theta": None if self.active_theta is None else self.active_theta.tolist(),
            "geometry_target": self.geometry_target.value,
        }
