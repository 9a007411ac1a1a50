"""
Simon-Says expression templates.

Activation values are analogues: each template names the controls an actor is
asked to activate. Only "jaw open" and "jaw open extreme" share a control.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from rig_tuner.utils.errors import RigContractError

from .expression_pair import ExpressionPair, PairKind

JAW_OPEN = "jaw open"
JAW_OPEN_EXTREME = "jaw open extreme"


@dataclass(frozen=True)
class ExpressionTemplate:
    name: str
    activations: Mapping[str, float] = field(default_factory=dict)
    kind: PairKind = PairKind.CAPTURED
    geometry_mask: tuple[int, ...] | None = None
    weight: float = 1.0

    def controls(self, control_names: Sequence[str]) -> np.ndarray:
        index = {name: i for i, name in enumerate(control_names)}
        c = np.zeros(len(control_names))
        for name, value in self.activations.items():
            if name not in index:
                _error_msg = f"Template '{self.name}' uses unknown control '{name}'"
                raise RigContractError(_error_msg)
            c[index[name]] = float(value)
        return c

    def to_pair(self, control_names: Sequence[str], v: ArrayLike) -> ExpressionPair:
        return ExpressionPair(
            name=self.name,
            c=self.controls(control_names),
            v=v,
            kind=self.kind,
            geometry_mask=self.geometry_mask,
            weight=self.weight,
        )


def _bilateral(base: str, value: float = 1.0) -> dict[str, float]:
    return {f"{base}_l": value, f"{base}_r": value}


PERSON19: tuple[ExpressionTemplate, ...] = (
    ExpressionTemplate("neutral"),
    ExpressionTemplate("brows down", _bilateral("brow_down")),
    ExpressionTemplate("brows up", _bilateral("brow_raise")),
    ExpressionTemplate("eyes wide", _bilateral("eye_widen")),
    ExpressionTemplate("eyes close", _bilateral("eye_blink")),
    ExpressionTemplate("nose wrinkle", _bilateral("nose_wrinkle")),
    ExpressionTemplate("cheek puff", _bilateral("cheek_puff")),
    ExpressionTemplate(
        "teeth grimace",
        {**_bilateral("mouth_upper_lip_raise", 0.8), **_bilateral("mouth_lower_lip_depress", 0.8)},
    ),
    ExpressionTemplate("corner pull", _bilateral("mouth_corner_pull")),
    ExpressionTemplate("mouth stretch", _bilateral("mouth_stretch")),
    ExpressionTemplate("corner depress", _bilateral("mouth_corner_depress")),
    ExpressionTemplate("lip press", _bilateral("mouth_press")),
    ExpressionTemplate("pursed lips", {"mouth_lips_purse_u": 1.0, "mouth_lips_purse_d": 1.0}),
    ExpressionTemplate("mouth funnel", {"mouth_funnel_u": 1.0, "mouth_funnel_d": 1.0}),
    ExpressionTemplate("lip bite", {"mouth_lips_tuck_d": 1.0}),
    ExpressionTemplate(JAW_OPEN, {"jaw_open": 0.6}),
    ExpressionTemplate(JAW_OPEN_EXTREME, {"jaw_open": 1.0, "jaw_open_extreme": 1.0}),
    ExpressionTemplate("jaw left", {"jaw_left": 1.0}),
    ExpressionTemplate("jaw right", {"jaw_right": 1.0}),
)

PUPPET15: tuple[ExpressionTemplate, ...] = (
    ExpressionTemplate("neutral"),
    ExpressionTemplate("eyes close", _bilateral("eye_blink")),
    ExpressionTemplate("eyes wide", _bilateral("eye_widen")),
    ExpressionTemplate("brows raise", _bilateral("brow_raise")),
    ExpressionTemplate("brows down", _bilateral("brow_down")),
    ExpressionTemplate("teeth grimace", _bilateral("mouth_upper_lip_raise", 0.8)),
    ExpressionTemplate("pursed smile", {**_bilateral("mouth_smile", 0.7), "mouth_purse": 0.6}),
    ExpressionTemplate("corner depress", _bilateral("mouth_corner_depress")),
    ExpressionTemplate(JAW_OPEN, {"jaw_open": 1.0}),
    ExpressionTemplate("jaw left", {"jaw_left": 1.0}),
    ExpressionTemplate("jaw right", {"jaw_right": 1.0}),
    ExpressionTemplate("OO", {"phoneme_oo": 1.0}),
    ExpressionTemplate("CH", {"phoneme_ch": 1.0}),
    ExpressionTemplate("M/B/P", {"phoneme_mbp": 1.0}),
    ExpressionTemplate("F/V", {"phoneme_fv": 1.0}),
)


def template_control_names(templates: Sequence[ExpressionTemplate]) -> list[str]:
    """Controls used by the templates, in order of first appearance."""
    names: dict[str, None] = {}
    for template in templates:
        names.update(dict.fromkeys(template.activations))
    return list(names)


def _synthetic_templates(
    control_names: Sequence[str], seed: int, max_group_size: int
) -> tuple[ExpressionTemplate, ...]:
    if len(control_names) < 2:
        _error_msg = "Synthetic expression sets need at least two controls"
        raise RigContractError(_error_msg)

    rng = np.random.default_rng(seed)
    order = [control_names[i] for i in rng.permutation(len(control_names))]
    jaw, jaw_extreme, rest = order[0], order[1], order[2:]

    templates = [
        ExpressionTemplate(JAW_OPEN, {jaw: 0.6}),
        ExpressionTemplate(JAW_OPEN_EXTREME, {jaw: 1.0, jaw_extreme: 1.0}),
    ]
    while rest:
        size = int(rng.integers(1, max_group_size + 1))
        group, rest = rest[:size], rest[size:]
        values = rng.uniform(0.4, 1.0, size=len(group))
        templates.append(
            ExpressionTemplate(
                f"expression {len(templates) - 1}",
                {name: float(value) for name, value in zip(group, values, strict=True)},
            )
        )
    return tuple(templates)


def make_expression_set(
    kind: str,
    seed: int = 0,
    control_names: Sequence[str] | None = None,
    max_group_size: int = 2,
) -> list[ExpressionTemplate]:
    """
    Return the named control templates of an expression set.
    kind is "person19", "puppet15" or "synthetic"; the synthetic set partitions
    control_names into seeded disjoint groups.
    """
    if kind == "person19":
        return list(PERSON19)
    if kind == "puppet15":
        return list(PUPPET15)
    if kind == "synthetic":
        if control_names is None:
            _error_msg = "Synthetic expression sets require control names"
            raise RigContractError(_error_msg)
        return list(_synthetic_templates(control_names, seed, max_group_size))

    _error_msg = f"Unknown expression set '{kind}'"
    raise RigContractError(_error_msg)


def make_seal_constraint(
    control_names: Sequence[str],
    control_a: str,
    control_b: str,
    v: ArrayLike,
    name: str = "lip seal",
    weight: float = 1.0,
) -> ExpressionPair:
    """
    Constraint pair activating two controls together, with the caller supplied
    geometry they must produce (e.g. closed lips).
    """
    template = ExpressionTemplate(
        name, {control_a: 1.0, control_b: 1.0}, PairKind.CONSTRAINT, weight=weight
    )
    return template.to_pair(control_names, v)
