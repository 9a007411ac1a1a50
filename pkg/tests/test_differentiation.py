import csv

import numpy as np
import pytest

from rig_tuner.differentiation import (
    DirectionStrategy,
    JacobianEstimate,
    SecantDiagnostics,
    StepPolicy,
    estimate_dvhat_dtheta,
    forward_difference,
    l_delta_profile,
    secant_update,
    select_step,
    solve_dT_dtheta,
)
from rig_tuner.repro import constants, perturbed_setting
from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import PerturbationMode, SolveMode, track_direct, tracker_rig_eval
from rig_tuner.utils.errors import NonFiniteError, RigContractError, SingularMatrixError


def _square(theta):
    return np.atleast_1d(theta**2)


@pytest.fixture
def an_affine_function():
    rng = np.random.default_rng(11)
    matrix = rng.standard_normal((4, 3))
    offset = rng.standard_normal(4)
    return matrix, lambda theta: matrix @ theta + offset


def test_secant_update_on_a_scalar_quadratic():
    est = JacobianEstimate.zeros(1, [1.0])
    updated = secant_update(est, _square, [1.0], 0.1)
    np.testing.assert_allclose(updated.matrix, [[2.1]], rtol=1e-12)
    assert updated.update_count == 1
    assert updated.last_step == 0.1


def test_secant_update_only_changes_the_stepped_direction():
    rng = np.random.default_rng(2)
    est = JacobianEstimate(rng.standard_normal((3, 2)), [0.5, -0.5])
    updated = secant_update(est, lambda t: np.array([t[0], t[1], t[0] * t[1]]), [1.0, 0.0], 1e-3)
    np.testing.assert_array_equal(updated.matrix[:, 1], est.matrix[:, 1])


def test_orthonormal_updates_recover_an_affine_jacobian(an_affine_function):
    matrix, u_eval = an_affine_function
    rotation = np.linalg.qr(np.random.default_rng(3).standard_normal((3, 3)))[0]
    est = estimate_dvhat_dtheta(
        u_eval,
        np.array([0.2, -0.1, 0.4]),
        DirectionStrategy.from_directions(rotation.T),
        step_policy=StepPolicy.fixed(1e-2),
    )
    np.testing.assert_allclose(est.matrix, matrix, atol=1e-9)
    assert est.update_count == 3


def test_secant_update_rejects_invalid_inputs(an_affine_function):
    _, u_eval = an_affine_function
    est = JacobianEstimate.zeros(4, np.zeros(3))
    with pytest.raises(RigContractError):
        secant_update(est, u_eval, [1.0, 1.0, 0.0], 0.1)
    with pytest.raises(RigContractError):
        forward_difference(u_eval, np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.0)

    def blows_up(theta):
        return np.array([np.inf]) if theta[0] > 0 else np.zeros(1)

    with pytest.raises(NonFiniteError):
        secant_update(JacobianEstimate.zeros(1, [0.0]), blows_up, [1.0], 0.1)


def test_step_selection_prefers_small_steps_on_smooth_functions():
    selection = select_step(_square, np.array([1.0]), np.array([1.0]))
    assert len(selection.l_delta_profile) == len(selection.s_grid) - 2
    assert selection.chosen_s == pytest.approx(1e-6)
    np.testing.assert_allclose(selection.chosen_difference, [2.0], atol=1e-5)
    assert selection.chosen_l_delta == selection.l_delta_profile.min()


def test_l_delta_profile_sums_neighbour_differences():
    differences = [np.array([0.0]), np.array([1.0]), np.array([3.0]), np.array([3.5])]
    np.testing.assert_allclose(l_delta_profile(differences), [3.0, 2.5])


@pytest.mark.parametrize("grid", [(1e-3, 1e-2), (1e-3, 1e-1, 1e-2), (0.0, 1e-2, 1e-1)])
def test_step_selection_rejects_invalid_grids(grid):
    with pytest.raises(RigContractError):
        select_step(_square, np.array([1.0]), np.array([1.0]), grid)


def test_step_selection_fails_when_every_step_is_non_finite():
    def only_finite_at_anchor(theta):
        return np.zeros(1) if theta[0] == 1.0 else np.array([np.nan])

    with pytest.raises(NonFiniteError):
        select_step(only_finite_at_anchor, np.array([1.0]), np.array([1.0]))


def test_frozen_policy_reuses_the_warm_step(an_affine_function):
    _, u_eval = an_affine_function
    warm = JacobianEstimate(np.zeros((4, 3)), np.zeros(3), update_count=1, last_step=0.5)
    diagnostics = SecantDiagnostics()
    estimate_dvhat_dtheta(
        u_eval,
        np.ones(3),
        DirectionStrategy.random(2, seed=1),
        warm,
        StepPolicy.frozen(),
        diagnostics=diagnostics,
        label="smile",
    )
    assert [record.s for record in diagnostics.records] == [0.5, 0.5]


def test_random_directions_are_seeded_unit_vectors():
    strategy = DirectionStrategy.random(3, seed=9)
    first = strategy.directions(5, strategy.make_rng(0, 1))
    second = strategy.directions(5, strategy.make_rng(0, 1))
    np.testing.assert_array_equal(np.array(first), np.array(second))
    np.testing.assert_allclose([np.linalg.norm(d) for d in first], np.ones(3))


def test_steepest_descent_direction_follows_the_negative_gradient():
    strategy = DirectionStrategy.steepest_descent()
    assert strategy.needs_gradient
    (direction,) = strategy.directions(2, gradient=[3.0, 4.0])
    np.testing.assert_allclose(direction, [-0.6, -0.8])
    assert strategy.directions(2, gradient=[0.0, 0.0]) == []
    with pytest.raises(RigContractError):
        strategy.directions(2)


def test_direction_strategy_round_trips_through_dicts():
    strategy = DirectionStrategy.from_directions([[1.0, 0.0], [0.0, 2.0]])
    assert DirectionStrategy.from_dict(strategy.to_dict()) == strategy
    with pytest.raises(RigContractError):
        strategy.directions(3)


def test_implicit_solve_on_the_scalar_rig():
    rig = LinearRig.from_matrix([[2.0]])
    dT_dtheta = solve_dT_dtheta(rig, [2.0], np.zeros((1, 1)), [2.0])
    np.testing.assert_allclose(dT_dtheta, [[-1.0]])


def test_implicit_solve_matches_the_tracker_derivative(a_linear_rig):
    v = constants.V[:, 0]
    theta = a_linear_rig.theta.copy()
    c = track_direct(a_linear_rig, v, SolveMode.inverse(), theta)
    dT_dtheta = solve_dT_dtheta(a_linear_rig, c, None, theta)

    h = 1e-6
    numeric = np.empty((3, 9))
    for i in range(9):
        step = np.zeros(9)
        step[i] = h
        numeric[:, i] = (
            track_direct(a_linear_rig, v, SolveMode.inverse(), theta + step)
            - track_direct(a_linear_rig, v, SolveMode.inverse(), theta - step)
        ) / (2 * h)
    np.testing.assert_allclose(dT_dtheta, numeric, atol=1e-6)


def test_implicit_solve_on_a_singular_rig_needs_regularization():
    rig = LinearRig.from_matrix([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SingularMatrixError):
        solve_dT_dtheta(rig, [1.0, 0.0], None, rig.theta)
    result = solve_dT_dtheta(rig, [1.0, 0.0], None, rig.theta, reg_eps=1e-3)
    assert np.all(np.isfinite(result))


def test_implicit_solve_leaves_masked_controls_at_zero(a_linear_rig):
    result = solve_dT_dtheta(
        a_linear_rig,
        constants.C[:, 0],
        None,
        a_linear_rig.theta,
        active_theta=[0, 4],
        control_mask=[True, False, True],
    )
    assert result.shape == (3, 2)
    np.testing.assert_array_equal(result[1], [0.0, 0.0])


def test_secant_diagnostics_are_written_in_a_stable_order(tmp_path):
    diagnostics = SecantDiagnostics()
    diagnostics.record("smile", 1, 1e-4, 0.5, 0.25)
    diagnostics.record("frown", 0, 1e-3, 0.1, 0.0)
    path = diagnostics.write_csv(tmp_path / "secant.csv")

    with path.open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["iteration", "expression", "direction", "s", "l_delta", "secant_residual"]
    assert [row[1] for row in rows[1:]] == ["frown", "smile"]
    assert rows[1][3] == "0.001"


def test_repeating_a_secant_update_is_a_projection():
    rng = np.random.default_rng(4)
    est = JacobianEstimate(rng.standard_normal((3, 2)), [0.3, -0.7])

    def u_eval(theta):
        return np.array([np.sin(theta[0]), theta[0] * theta[1], np.exp(theta[1])])

    direction = np.array([0.6, 0.8])
    once = secant_update(est, u_eval, direction, 1e-3)
    twice = secant_update(once, u_eval, direction, 1e-3)
    assert np.linalg.norm(twice.matrix - once.matrix) <= 1e-12


def test_orthonormal_updates_recover_a_wide_affine_jacobian():
    rng = np.random.default_rng(21)
    matrix = rng.standard_normal((3, 9))
    offset = rng.standard_normal(3)
    directions = np.linalg.qr(rng.standard_normal((9, 9)))[0].T
    assert np.linalg.matrix_rank(directions) == 9

    est = estimate_dvhat_dtheta(
        lambda theta: matrix @ theta + offset,
        rng.standard_normal(9),
        DirectionStrategy.from_directions(directions),
        step_policy=StepPolicy.fixed(1e-2),
    )
    assert np.linalg.norm(est.matrix - matrix) <= 1e-8


def test_warm_start_beats_cold_start_on_the_first_direction():
    for trial in range(100):
        rng = np.random.default_rng([5, trial])
        matrix = rng.standard_normal((4, 3))
        offset = rng.standard_normal(4)

        def u_eval(theta, matrix=matrix, offset=offset):
            return matrix @ theta + offset

        previous = rng.standard_normal(3)
        sweep = np.linalg.qr(rng.standard_normal((3, 3)))[0].T
        warm = estimate_dvhat_dtheta(
            u_eval,
            previous,
            DirectionStrategy.from_directions(sweep),
            step_policy=StepPolicy.fixed(1e-3),
        )

        anchor = previous + 1e-3 * rng.standard_normal(3)
        (direction,) = DirectionStrategy.random(1, seed=trial).directions(3)
        difference = forward_difference(u_eval, anchor, direction, 1e-3)
        warm_residual = np.linalg.norm(warm.reanchored(anchor).matrix @ direction - difference)
        cold_residual = np.linalg.norm(difference)
        assert warm_residual <= cold_residual, trial


def test_step_selection_picks_an_interior_step_for_a_curved_function():
    coefficients = np.array([1.0, 2.0, -1.0, 3.0])

    def u_eval(theta):
        return 1e3 + coefficients * theta[0] + 1e-6 * theta[0] ** 2

    selection = select_step(u_eval, np.array([1.0]), np.array([1.0]))
    profile = selection.l_delta_profile
    assert selection.interior_grid[0] < selection.chosen_s < selection.interior_grid[-1]
    assert profile[0] > 10 * profile.min()
    assert profile[-1] > 10 * profile.min()


def _tabulated_differences(values):
    """u along [1.0] from 0 whose difference quotient at grid step s is values[s]."""

    def u_eval(theta):
        s = float(theta[0])
        return np.array([0.0 if s == 0.0 else s * values[s]])

    return u_eval


def test_step_selection_breaks_exact_ties_towards_the_smallest_step():
    grid = (0.25, 0.5, 1.0, 2.0, 4.0)
    u_eval = _tabulated_differences(dict(zip(grid, [1.0, 2.0, 3.0, 4.0, 6.0], strict=True)))
    selection = select_step(u_eval, np.array([0.0]), np.array([1.0]), grid)
    np.testing.assert_allclose(selection.l_delta_profile, [2.0, 2.0, 3.0])
    assert selection.chosen_s == 0.5


def test_step_selection_only_widens_ties_relative_to_the_minimum():
    grid = (0.25, 0.5, 1.0, 2.0, 4.0)
    u_eval = _tabulated_differences(dict(zip(grid, [1.0, 2.0, 3.0, 3.9, 5.0], strict=True)))
    anchor, direction = np.array([0.0]), np.array([1.0])

    assert select_step(u_eval, anchor, direction, grid).chosen_s == 1.0
    assert select_step(u_eval, anchor, direction, grid, tie_rtol=0.1).chosen_s == 0.5


def test_step_selection_on_the_additive_tracker_takes_the_argmin():
    setting = perturbed_setting(PerturbationMode.T1_ADDITIVE)
    theta = constants.A_INIT.ravel()
    direction = np.random.default_rng(3).standard_normal(theta.shape[0])
    direction /= np.linalg.norm(direction)

    for pair in setting.pairs:

        def u_eval(theta, v=pair.v):
            return tracker_rig_eval(setting.tracker, setting.rig, v, theta)

        selection = select_step(u_eval, theta, direction)
        best = int(np.argmin(selection.l_delta_profile))
        assert selection.chosen_s == selection.interior_grid[best]
        assert selection.chosen_s > 1e-6
