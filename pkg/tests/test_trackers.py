import numpy as np
import pytest

from rig_tuner.repro import constants
from rig_tuner.rigs import LinearRig
from rig_tuner.trackers import (
    ControlPerturbation,
    CountingTracker,
    DirectTracker,
    FilterMask,
    PerturbationMode,
    PerturbedTracker,
    SolveKind,
    SolveMode,
    decimate_problem,
    filter_tracker,
    track_direct,
    track_perturbed,
    tracker_rig_eval,
)
from rig_tuner.utils.errors import RigContractError, SingularMatrixError, TrackerError


@pytest.fixture
def a_singular_rig():
    return LinearRig.from_matrix([[1.0, 0.0], [0.0, 0.0]])


@pytest.mark.parametrize(
    "mode",
    [SolveMode.inverse(), SolveMode.least_squares(), SolveMode.min_norm(), SolveMode.lm(1e-8)],
)
def test_direct_tracker_inverts_the_example_rig(a_linear_rig, mode):
    tracker = DirectTracker(a_linear_rig, mode)
    for k in range(4):
        c = tracker.track(constants.V[:, k], a_linear_rig.theta)
        np.testing.assert_allclose(c, constants.C[:, k], rtol=0, atol=1e-10)


@pytest.mark.parametrize(
    "mode",
    [SolveMode.inverse(), SolveMode.least_squares(), SolveMode.min_norm(), SolveMode.lm(1e-8)],
)
def test_direct_tracker_is_a_left_inverse_on_seeded_rigs(mode):
    for seed in range(20):
        rng = np.random.default_rng([12, seed])
        a_matrix = 3.0 * np.eye(4) + rng.standard_normal((4, 4))
        rig = LinearRig.from_matrix(a_matrix)
        c = rng.uniform(-1.0, 1.0, 4)
        np.testing.assert_allclose(
            track_direct(rig, a_matrix @ c, mode), c, rtol=0, atol=1e-10, err_msg=f"seed {seed}"
        )


def test_direct_tracker_uses_the_given_theta(a_direct_tracker):
    c = a_direct_tracker.track([2.0, 4.0, 6.0], constants.A_INIT.ravel())
    np.testing.assert_allclose(c, [2.0, 4.0, 6.0])


def test_inverse_solve_rejects_singular_and_non_square_rigs(a_singular_rig):
    with pytest.raises(SingularMatrixError):
        track_direct(a_singular_rig, [2.0, 0.0], SolveMode.inverse())
    with pytest.raises(RigContractError):
        track_direct(LinearRig.from_matrix(np.ones((3, 2))), np.ones(3), SolveMode.inverse())


def test_regularized_solves_handle_singular_rigs(a_singular_rig):
    np.testing.assert_allclose(
        track_direct(a_singular_rig, [2.0, 0.0], SolveMode.min_norm()), [2.0, 0.0]
    )
    eps = 1e-3
    np.testing.assert_allclose(
        track_direct(a_singular_rig, [2.0, 0.0], SolveMode.lm(eps)), [2.0 / (1 + eps**2), 0.0]
    )


def test_solve_mode_parsing():
    assert SolveMode.parse("lm(1e-4)") == SolveMode.lm(1e-4)
    assert SolveMode.parse("inverse").kind == SolveKind.INVERSE
    assert SolveMode.parse("lm") == SolveMode.lm(1e-8)
    assert str(SolveMode.lm(1e-8)) == "lm(1e-08)"
    with pytest.raises(RigContractError):
        SolveMode.parse("newton")
    with pytest.raises(RigContractError):
        SolveMode.lm(-1.0)


def test_joint_rig_is_tracked_by_gauss_newton(a_joint_psd_rig):
    c_true = np.array([0.5, 0.4])
    v = a_joint_psd_rig.evaluate(c_true)
    c = track_direct(a_joint_psd_rig, v, SolveMode.least_squares())
    np.testing.assert_allclose(c, c_true, atol=1e-6)


def test_additive_perturbation_offsets_the_exact_controls():
    rig = LinearRig.from_matrix([[2.0]])
    perturbation = ControlPerturbation.constant(PerturbationMode.T1_ADDITIVE, [0.1])
    np.testing.assert_allclose(
        track_perturbed(rig, [4.0], perturbation, SolveMode.inverse()), [2.1]
    )


def test_rig_scaled_perturbation_offsets_by_the_rig_matrix():
    rig = LinearRig.from_matrix([[2.0]])
    perturbation = ControlPerturbation.constant(PerturbationMode.T2_RIG_SCALED, [0.1])
    tracker = PerturbedTracker(rig, perturbation, SolveMode.inverse())
    np.testing.assert_allclose(tracker.track([4.0], rig.theta), [2.2])

    with pytest.raises(RigContractError):
        track_perturbed(LinearRig.from_matrix(np.ones((2, 1))), [1.0, 1.0], perturbation)


def test_lookup_perturbation_is_zero_for_unknown_geometry(a_linear_rig):
    perturbation = ControlPerturbation.lookup(
        PerturbationMode.T1_ADDITIVE, [constants.V[:, 0]], [[0.1, 0.2, 0.3]]
    )
    np.testing.assert_array_equal(perturbation.c_tilde(constants.V[:, 0]), [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(perturbation.c_tilde(constants.V[:, 1]), np.zeros(3))


def test_filter_mask_matrices():
    mask = FilterMask.from_indices([0, 2], 3)
    np.testing.assert_array_equal(mask.h_matrix, np.diag([1.0, 0.0, 1.0]))
    np.testing.assert_array_equal(
        mask.decimation_matrix.T @ mask.decimation_matrix, mask.h_matrix
    )
    np.testing.assert_array_equal(mask.apply([1.0, 2.0, 3.0]), [1.0, 0.0, 3.0])
    np.testing.assert_array_equal(mask.embed(mask.decimate([1.0, 2.0, 3.0])), [1.0, 0.0, 3.0])
    assert mask.complement() == FilterMask.from_indices([1], 3)
    assert (mask & FilterMask.from_indices([2], 3)).n_active == 1
    assert (mask | mask.complement()) == FilterMask.all_active(3)
    assert FilterMask.from_controls([0.0, 1e-12, 0.5]) == FilterMask.from_indices([2], 3)


def test_filtered_tracker_zeroes_inactive_controls(a_direct_tracker, a_linear_rig):
    tracker = filter_tracker(a_direct_tracker, FilterMask.from_indices([0, 1], 3))
    c = tracker.track(constants.V[:, 0], a_linear_rig.theta)
    np.testing.assert_allclose(c, [1.0, 2.0, 0.0])

    nested = filter_tracker(tracker, FilterMask.from_indices([1, 2], 3))
    assert nested.inner is a_direct_tracker
    assert nested.mask == FilterMask.from_indices([1], 3)


def test_decimated_problem_tracks_the_active_controls(a_joint_psd_rig):
    problem = decimate_problem(a_joint_psd_rig, FilterMask.from_indices([1], 2))
    np.testing.assert_array_equal(problem.factors, [1])
    rows, cols = a_joint_psd_rig.sparsity
    np.testing.assert_array_equal(problem.theta_indices, np.flatnonzero(cols == 1))

    tracker = DirectTracker(a_joint_psd_rig, SolveMode.least_squares()).decimate(problem)
    v = a_joint_psd_rig.evaluate([0.0, 0.5])
    c = tracker.track(v, problem.sub_theta(a_joint_psd_rig.theta))
    np.testing.assert_allclose(problem.embed_controls(c), [0.0, 0.5], atol=1e-8)

    theta = problem.embed_theta(a_joint_psd_rig.theta, np.zeros(problem.theta_indices.size))
    assert np.all(theta[problem.theta_indices] == 0)


def test_decimation_rejects_empty_masks(a_joint_psd_rig):
    with pytest.raises(RigContractError):
        decimate_problem(a_joint_psd_rig, FilterMask.from_indices([], 2))


def test_trackers_without_decimation_support_refuse_it(a_linear_rig):
    perturbation = ControlPerturbation.constant(PerturbationMode.T1_ADDITIVE, np.zeros(3))
    tracker = PerturbedTracker(a_linear_rig, perturbation)
    assert not tracker.capabilities.supports_decimation
    problem = decimate_problem(a_linear_rig, FilterMask.from_indices([0], 3))
    with pytest.raises(TrackerError):
        tracker.decimate(problem)


def test_counting_tracker_counts_every_call(a_direct_tracker, a_linear_rig):
    tracker = CountingTracker(a_direct_tracker)
    for k in range(3):
        tracker(constants.V[:, k], a_linear_rig.theta)
    assert tracker.evaluation_count == 3
    assert tracker.capabilities.supports_decimation


def test_tracker_rig_eval_reproduces_consistent_geometry(a_direct_tracker, a_linear_rig):
    v = constants.V[:, 1]
    np.testing.assert_allclose(
        tracker_rig_eval(a_direct_tracker, a_linear_rig, v, a_linear_rig.theta), v
    )
    corrected = tracker_rig_eval(
        a_direct_tracker, a_linear_rig, v, a_linear_rig.theta, lambda g, _t: 0.1 * g
    )
    np.testing.assert_allclose(corrected, 0.9 * v)
