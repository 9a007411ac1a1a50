from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from rig_tuner.utils.errors import RigContractError
from rig_tuner.utils.file_access import reject_unknown_fields


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Shape of a synthetic joint rig. The defaults give a desk-scale rig with
    20 columns of 6 nonzeros (120 parameters).
    """

    n_controls: int = 12
    p_psd: int = 20
    m_geometry: int = 60
    sparsity_per_column: int = 6
    primary_fraction: float = 0.5
    perturb_magnitude: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.n_controls < 2 or self.m_geometry < 1:
            _error_msg = f"Invalid rig dimensions n={self.n_controls}, m={self.m_geometry}"
            raise RigContractError(_error_msg)
        if self.p_psd < self.n_controls:
            _error_msg = f"p_psd ({self.p_psd}) must be at least n_controls ({self.n_controls})"
            raise RigContractError(_error_msg)
        if not 1 <= self.sparsity_per_column <= self.m_geometry:
            _error_msg = (
                f"Cannot place {self.sparsity_per_column} nonzeros per column "
                f"in {self.m_geometry} geometry rows"
            )
            raise RigContractError(_error_msg)
        if not 0 < self.primary_fraction <= 1:
            _error_msg = f"primary_fraction must lie in (0, 1], got {self.primary_fraction}"
            raise RigContractError(_error_msg)
        if self.perturb_magnitude < 0:
            _error_msg = f"perturb_magnitude must be nonnegative, got {self.perturb_magnitude}"
            raise RigContractError(_error_msg)

    @property
    def n_params(self) -> int:
        return self.p_psd * self.sparsity_per_column

    @classmethod
    def production(cls, seed: int = 0) -> SyntheticSpec:
        """Production-sized shape: 174 controls, 814 PSDs, 7830 joint DOFs."""
        return cls(
            n_controls=174,
            p_psd=814,
            m_geometry=7830,
            sparsity_per_column=900,
            primary_fraction=97 / 174,
            seed=seed,
        )

    def replace(self, **changes) -> SyntheticSpec:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, content: dict) -> SyntheticSpec:
        reject_unknown_fields(cls, content)
        return cls(**content)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
