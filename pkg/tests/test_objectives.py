import numpy as np
import pytest

from rig_tuner.differentiation import solve_dT_dtheta
from rig_tuner.objectives import (
    GeometryTarget,
    ObjectiveConfig,
    SpuriousTerm,
    TrackerVariant,
    diagnostic_lvhat,
    direct_fit,
    direct_loss,
    eval_objective,
    evaluate_pairs,
    grad_objective,
    make_analytic_dvhat,
    prepare_pairs,
)
from rig_tuner.repro import constants, first_columns, pairs_from_columns
from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import (
    ControlPerturbation,
    DirectTracker,
    PerturbationMode,
    PerturbedTracker,
    SolveMode,
    tracker_rig_eval,
)
from rig_tuner.utils.errors import ConfigError, RigContractError, TrackerError


@pytest.fixture
def sparse_pairs():
    c_matrix = np.array([[1.0, 0.0, 0.5], [0.0, 2.0, 0.0], [2.0, 1.0, 0.0]])
    return pairs_from_columns(c_matrix, constants.A @ c_matrix, prefix="expression")


@pytest.fixture
def a_moved_theta(a_linear_rig):
    rng = np.random.default_rng(8)
    return a_linear_rig.theta + 0.1 * rng.standard_normal(a_linear_rig.n_params)


def _exact_jacobians(config, pairs, theta, tracker, rig):
    jacobians = []
    for setup in prepare_pairs(config, pairs, tracker, rig):
        c = tracker.track(setup.pair.v, theta)
        full = solve_dT_dtheta(rig, c, None, theta)
        jacobians.append(
            {
                TrackerVariant.FULL: full,
                TrackerVariant.FILTERED: setup.variant_mask.h_matrix @ full,
            }
        )
    return jacobians


def _central_gradient(func, theta, h=1e-6):
    gradient = np.empty_like(theta)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = h
        gradient[i] = (func(theta + step) - func(theta - step)) / (2 * h)
    return gradient


def test_objective_vanishes_at_the_true_rig(a_linear_rig, a_direct_tracker, consistent_pairs):
    config = ObjectiveConfig(gamma3=1.0)
    loss = eval_objective(
        config, consistent_pairs, a_linear_rig.theta, a_direct_tracker, a_linear_rig
    )
    assert loss.total == pytest.approx(0.0, abs=1e-20)
    assert set(loss.per_expression) == {pair.name for pair in consistent_pairs}


@pytest.mark.parametrize("gamma1_variant", [TrackerVariant.FULL, TrackerVariant.FILTERED])
def test_objective_gradient_matches_central_differences(
    a_linear_rig, a_direct_tracker, sparse_pairs, a_moved_theta, gamma1_variant
):
    config = ObjectiveConfig(
        gamma1=1.0,
        gamma2=0.5,
        gamma3=0.25,
        gamma_eps=1e-2,
        gamma1_variant=gamma1_variant,
        spurious_terms=[SpuriousTerm(weight=0.5)],
    )
    jacobians = _exact_jacobians(
        config, sparse_pairs, a_moved_theta, a_direct_tracker, a_linear_rig
    )
    gradient = grad_objective(
        config, sparse_pairs, a_moved_theta, a_direct_tracker, a_linear_rig, jacobians
    )

    def total(theta):
        return eval_objective(config, sparse_pairs, theta, a_direct_tracker, a_linear_rig).total

    np.testing.assert_allclose(
        gradient, _central_gradient(total, a_moved_theta), rtol=1e-5, atol=1e-7
    )


def test_gradient_is_restricted_to_active_parameters(
    a_linear_rig, a_direct_tracker, sparse_pairs, a_moved_theta
):
    full_config = ObjectiveConfig()
    config = full_config.replace(active_theta=[0, 4, 8])
    jacobians = _exact_jacobians(
        full_config, sparse_pairs, a_moved_theta, a_direct_tracker, a_linear_rig
    )
    full = grad_objective(
        full_config, sparse_pairs, a_moved_theta, a_direct_tracker, a_linear_rig, jacobians
    )
    active_jacobians = [
        {variant: matrix[:, [0, 4, 8]] for variant, matrix in entry.items()}
        for entry in jacobians
    ]
    active = grad_objective(
        config, sparse_pairs, a_moved_theta, a_direct_tracker, a_linear_rig, active_jacobians
    )
    np.testing.assert_allclose(active, full[[0, 4, 8]])


def test_spurious_term_only_sees_controls_outside_the_expression(
    a_linear_rig, sparse_pairs, a_moved_theta
):
    tracker = DirectTracker(a_linear_rig, SolveMode.inverse())
    config = ObjectiveConfig(gamma1=0.0, gamma2=0.0, gamma_eps=0.0, spurious_terms=[{}])
    (setup,) = prepare_pairs(config, sparse_pairs[2:], tracker, a_linear_rig)
    np.testing.assert_array_equal(setup.spurious_masks[0].active, [False, True, True])

    loss = eval_objective(config, sparse_pairs[2:], a_moved_theta, tracker, a_linear_rig)
    c = tracker.track(sparse_pairs[2].v, a_moved_theta)
    assert loss.spurious[0] == pytest.approx(c[1] ** 2 + c[2] ** 2)
    assert loss.total == pytest.approx(loss.spurious[0])


def test_loss_breakdown_is_consistent(a_linear_rig, a_direct_tracker, sparse_pairs, a_moved_theta):
    config = ObjectiveConfig(gamma3=1.0, spurious_terms=[SpuriousTerm(weight=2.0)])
    loss = eval_objective(config, sparse_pairs, a_moved_theta, a_direct_tracker, a_linear_rig)
    assert loss.total == pytest.approx(loss.recompute_total())
    assert sum(loss.per_expression.values()) == pytest.approx(
        loss.total - config.gamma_eps * loss.gamma_eps
    )
    assert list(loss.term_columns()) == [
        "gamma1",
        "gamma2",
        "gamma3",
        "gamma_eps",
        "spurious_0",
        "total",
    ]


def test_pair_evaluations_keep_pair_order_with_workers(
    a_linear_rig, a_direct_tracker, consistent_pairs, a_moved_theta
):
    config = ObjectiveConfig()
    setups = prepare_pairs(config, consistent_pairs, a_direct_tracker, a_linear_rig)
    serial = evaluate_pairs(setups, config, a_direct_tracker, a_linear_rig, a_moved_theta)
    parallel = evaluate_pairs(setups, config, a_direct_tracker, a_linear_rig, a_moved_theta, 3)
    assert [e.name for e in parallel] == [e.name for e in serial]
    for first, second in zip(serial, parallel, strict=True):
        np.testing.assert_array_equal(first.gamma1_residual, second.gamma1_residual)


def test_decimated_variant_tracks_each_expression_alone(a_joint_psd_rig):
    pairs = pairs_from_columns(
        np.array([[0.5, 0.0], [0.0, 0.4]]),
        np.column_stack(
            [a_joint_psd_rig.evaluate([0.5, 0.0]), a_joint_psd_rig.evaluate([0.0, 0.4])]
        ),
    )
    tracker = DirectTracker(a_joint_psd_rig, SolveMode.least_squares())
    config = ObjectiveConfig(gamma1_variant="decimated", gamma2=0.0)
    loss = eval_objective(config, pairs, a_joint_psd_rig.theta, tracker, a_joint_psd_rig)
    assert loss.gamma1 == pytest.approx(0.0, abs=1e-12)

    perturbation = ControlPerturbation.constant(PerturbationMode.T1_ADDITIVE, np.zeros(2))
    tracker = PerturbedTracker(a_joint_psd_rig, perturbation)
    with pytest.raises(TrackerError):
        prepare_pairs(config, pairs, tracker, a_joint_psd_rig)


def test_direct_fit_on_the_perturbed_geometry():
    pairs = pairs_from_columns(constants.C, constants.V_HAT)
    result = direct_fit(pairs)
    assert result.loss == pytest.approx(6.60e-4, rel=0.02)
    assert not result.rank_deficient
    assert direct_loss(result.a_matrix(3), pairs) == pytest.approx(result.loss)


def test_direct_fit_flags_rank_deficiency():
    pairs = pairs_from_columns(first_columns(constants.C, 2), first_columns(constants.V, 2))
    result = direct_fit(pairs)
    assert result.rank_deficient
    assert result.rank == 2
    assert result.loss == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("mode", [PerturbationMode.T1_ADDITIVE, PerturbationMode.T2_RIG_SCALED])
def test_analytic_dvhat_matches_central_differences(a_linear_rig, a_moved_theta, mode):
    perturbation = ControlPerturbation.constant(mode, [0.01, -0.02, 0.03])
    tracker = PerturbedTracker(a_linear_rig, perturbation, SolveMode.inverse())
    v = constants.V[:, 0]

    exact = make_analytic_dvhat(a_linear_rig, perturbation)(v, a_moved_theta)
    numeric = np.column_stack(
        [
            _central_gradient(
                lambda theta, row=row: tracker_rig_eval(tracker, a_linear_rig, v, theta)[row],
                a_moved_theta,
            )
            for row in range(3)
        ]
    ).T
    np.testing.assert_allclose(exact, numeric, atol=1e-7)
    assert diagnostic_lvhat([numeric], [exact]) < 1e-12


def test_diagnostic_lvhat_rejects_mismatched_inputs():
    with pytest.raises(RigContractError):
        diagnostic_lvhat([np.zeros((1, 2))], [])
    with pytest.raises(RigContractError):
        diagnostic_lvhat([np.zeros((1, 2))], [np.zeros((2, 1))])


def test_objective_config_validation(a_linear_rig):
    with pytest.raises(RigContractError):
        ObjectiveConfig(gamma1=-1.0)
    with pytest.raises(RigContractError):
        ObjectiveConfig(gamma1=0.0, gamma2=0.0, gamma_eps=0.0)
    with pytest.raises(RigContractError):
        ObjectiveConfig(active_theta=[12]).check(a_linear_rig)
    with pytest.raises(ConfigError):
        ObjectiveConfig.from_dict({"gamma4": 1.0})


def test_objective_config_round_trips_through_dicts():
    config = ObjectiveConfig(
        gamma3=0.5,
        gamma2_variant=TrackerVariant.FILTERED,
        variant_controls=[0, 2],
        spurious_terms=[SpuriousTerm([1], 0.1, target_zero=False)],
        theta_R=np.arange(9.0),
        active_theta=[3, 1],
        geometry_target=GeometryTarget.PAIR,
    )
    restored = ObjectiveConfig.from_dict(config.to_dict())
    assert restored.to_dict() == config.to_dict()
    assert restored.spurious_terms == config.spurious_terms
    np.testing.assert_array_equal(restored.active_theta, [1, 3])


_SINGLE_TERMS = {
    "gamma1": ObjectiveConfig(gamma1=1.0, gamma2=0.0, gamma_eps=0.0),
    "gamma1 filtered": ObjectiveConfig(
        gamma1=1.0, gamma2=0.0, gamma_eps=0.0, gamma1_variant=TrackerVariant.FILTERED
    ),
    "gamma2": ObjectiveConfig(gamma1=0.0, gamma2=1.0, gamma_eps=0.0),
    "gamma3": ObjectiveConfig(gamma1=0.0, gamma2=0.0, gamma3=1.0, gamma_eps=0.0),
    "gamma_eps": ObjectiveConfig(gamma1=0.0, gamma2=0.0, gamma_eps=1.0),
    "spurious": ObjectiveConfig(
        gamma1=0.0, gamma2=0.0, gamma_eps=0.0, spurious_terms=[SpuriousTerm(weight=1.0)]
    ),
}


def _seeded_instance(seed):
    rng = np.random.default_rng([11, seed])
    a_matrix = 2.0 * np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    rig = LinearRig.from_matrix(a_matrix)
    c_matrix = rng.standard_normal((3, 3)) * (rng.random((3, 3)) > 0.4)
    c_matrix[np.arange(3), np.arange(3)] = 1.0 + rng.random(3)
    pairs = pairs_from_columns(c_matrix, a_matrix @ c_matrix, prefix="expression")
    theta = rig.theta + 0.05 * rng.standard_normal(rig.n_params)
    return rig, pairs, theta


@pytest.mark.parametrize("term", list(_SINGLE_TERMS))
def test_every_term_gradient_matches_central_differences_on_seeded_rigs(term):
    config = _SINGLE_TERMS[term]
    for seed in range(50):
        rig, pairs, theta = _seeded_instance(seed)
        tracker = DirectTracker(rig, SolveMode.inverse())
        jacobians = _exact_jacobians(config, pairs, theta, tracker, rig)
        gradient = grad_objective(config, pairs, theta, tracker, rig, jacobians)

        def total(theta, rig=rig, pairs=pairs, tracker=tracker):
            return eval_objective(config, pairs, theta, tracker, rig).total

        np.testing.assert_allclose(
            gradient,
            _central_gradient(total, theta),
            rtol=1e-5,
            atol=1e-7,
            err_msg=f"{term}, seed {seed}",
        )
