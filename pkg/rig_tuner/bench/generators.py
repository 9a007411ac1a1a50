"""
Seeded generators for ground-truth joint rigs, morph-like perturbations and
expression templates. Every function is a pure function of its arguments.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence

import numpy as np

from rig_tuner.calibration import ExpressionTemplate
from rig_tuner.rigs import JointPsdRig, Rig, RigParams
from rig_tuner.utils.errors import RigContractError

from .synthetic_spec import SyntheticSpec

CALIBRATION_ACTIVATION = 0.8


def _corrective_definitions(
    n_controls: int, count: int, rng: np.random.Generator
) -> list[tuple[int, ...]]:
    pairs = list(itertools.combinations(range(n_controls), 2))
    rng.shuffle(pairs)
    if count <= len(pairs):
        return [tuple(sorted(p)) for p in pairs[:count]]

    triples = list(itertools.combinations(range(n_controls), 3))
    rng.shuffle(triples)
    if count > len(pairs) + len(triples):
        _error_msg = f"Cannot build {count} distinct corrective PSDs from {n_controls} controls"
        raise RigContractError(_error_msg)
    return [tuple(p) for p in pairs] + [tuple(t) for t in triples[: count - len(pairs)]]


def generate_rig(spec: SyntheticSpec) -> JointPsdRig:
    """
    Ground-truth joint rig. Corrective PSD columns are products of two (then
    three) controls and carry smaller weights than the primary columns.
    """
    rng = np.random.default_rng(spec.seed)
    n, p, m, k = spec.n_controls, spec.p_psd, spec.m_geometry, spec.sparsity_per_column
    definitions = [(i,) for i in range(n)] + _corrective_definitions(n, p - n, rng)

    rows, cols, theta = [], [], []
    for column in range(p):
        scale = 1.0 if column < n else 0.3
        rows.append(np.sort(rng.choice(m, size=k, replace=False)))
        cols.append(np.full(k, column))
        signs = rng.choice([-1.0, 1.0], size=k)
        theta.append(scale * signs * rng.uniform(0.2, 1.0, size=k))

    n_primary = max(1, round(spec.primary_fraction * n))
    primary_mask = np.zeros(n, dtype=bool)
    primary_mask[rng.permutation(n)[:n_primary]] = True

    rig = JointPsdRig(
        n,
        m,
        definitions,
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(theta),
        primary_mask,
        [f"ctrl_{i:03d}" for i in range(n)],
    )
    logging.debug("Generated %r with seed %d", rig, spec.seed)
    return rig


def perturb_rig(rig: Rig, magnitude: float, seed: int) -> RigParams:
    """theta_M = theta_GT * (1 + magnitude * xi) with seeded standard normal xi."""
    if magnitude < 0:
        _error_msg = f"Perturbation magnitude must be nonnegative, got {magnitude}"
        raise RigContractError(_error_msg)
    xi = np.random.default_rng(seed).standard_normal(rig.n_params)
    return rig.theta * (1.0 + magnitude * xi)


def make_calibration_templates(
    rig: Rig, activation: float = CALIBRATION_ACTIVATION
) -> list[ExpressionTemplate]:
    """
    One template per factor column activating exactly that factor's controls.
    Ordered by subset size, the design is triangular so every parameter
    reached by a factor is identifiable.
    """
    names = rig.control_names
    templates = []
    for factor in range(rig.n_factors):
        controls = rig.factor_controls(factor)
        label = "+".join(names[i] for i in controls)
        templates.append(
            ExpressionTemplate(f"calib {label}", {names[i]: activation for i in controls})
        )
    return templates


def make_training_templates(
    rig: Rig,
    corrective_fraction: float = 0.5,
    seed: int = 0,
    activation: float = CALIBRATION_ACTIVATION,
) -> list[ExpressionTemplate]:
    """
    Calibration templates of every single-control factor and a seeded share of
    the corrective factors. The parameters of the dropped corrective factors
    get no training data.
    """
    if not 0 <= corrective_fraction <= 1:
        _error_msg = f"corrective_fraction must lie in [0, 1], got {corrective_fraction}"
        raise RigContractError(_error_msg)
    templates = make_calibration_templates(rig, activation)
    corrective = [f for f in range(rig.n_factors) if len(rig.factor_controls(f)) > 1]
    count = round(corrective_fraction * len(corrective))
    kept = set(np.random.default_rng(seed).choice(corrective, size=count, replace=False).tolist())
    return [
        template
        for factor, template in enumerate(templates)
        if len(rig.factor_controls(factor)) == 1 or factor in kept
    ]


def make_holdout_templates(
    rig: Rig,
    train: Sequence[ExpressionTemplate],
    count: int = 8,
    seed: int = 0,
    extra_activation: float = 0.3,
) -> list[ExpressionTemplate]:
    """
    Compound expressions unseen during training: convex combinations of two or
    three training templates plus one PSD none of them activates, raised to
    extra_activation.
    """
    if len(train) < 2:
        _error_msg = "Holdout templates need at least two training templates"
        raise RigContractError(_error_msg)

    rng = np.random.default_rng(seed)
    names = rig.control_names
    templates = []
    for index in range(count):
        size = int(rng.integers(2, min(3, len(train)) + 1))
        chosen = rng.choice(len(train), size=size, replace=False)
        weights = rng.dirichlet(np.ones(size))
        c = sum(w * train[i].controls(names) for w, i in zip(weights, chosen, strict=True))

        unused = np.flatnonzero(rig.factors(c) == 0)
        if unused.size:
            factor = int(rng.choice(unused))
            if extra_activation > 0:
                controls = list(rig.factor_controls(factor))
                c[controls] = np.maximum(c[controls], extra_activation)
        templates.append(
            ExpressionTemplate(
                f"holdout {index}",
                {names[i]: float(c[i]) for i in np.flatnonzero(c)},
            )
        )
    return templates


def template_matrix(rig: Rig, templates: Sequence[ExpressionTemplate]) -> np.ndarray:
    return np.array([t.controls(rig.control_names) for t in templates])


def check_disjoint(
    rig: Rig, train: Sequence[ExpressionTemplate], holdout: Sequence[ExpressionTemplate]
) -> None:
    shared = {t.name for t in train} & {t.name for t in holdout}
    if shared:
        _error_msg = f"Holdout templates reuse training names {sorted(shared)}"
        raise RigContractError(_error_msg)
    train_c = template_matrix(rig, train)
    for template in holdout:
        c = template.controls(rig.control_names)
        if np.any(np.all(np.isclose(train_c, c, rtol=0, atol=1e-12), axis=1)):
            _error_msg = f"Holdout template '{template.name}' repeats a training expression"
            raise RigContractError(_error_msg)
