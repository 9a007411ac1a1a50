import numpy as np
import pytest

from rig_tuner.calibration import (
    CalibrationConfig,
    ExpressionPair,
    PairKind,
    fit_residuals,
    fit_rig_params,
    mask_geometry,
    unidentified_parameters,
)
from rig_tuner.repro import constants, first_columns, pairs_from_columns
from rig_tuner.rigs import LinearRig
from rig_tuner.utils.errors import ConfigError, RigContractError, UnderdeterminedSystemError


@pytest.fixture
def two_pairs():
    return pairs_from_columns(
        first_columns(constants.C, 2), first_columns(constants.V, 2)
    )


def test_scalar_fit_recovers_the_rig():
    rig = LinearRig.from_matrix([[5.0]])
    theta = fit_rig_params(rig, [ExpressionPair("smile", [1.0], [-1.0])])
    np.testing.assert_allclose(theta, [-1.0])


def test_four_consistent_pairs_recover_the_rig(an_identity_rig, consistent_pairs):
    theta = fit_rig_params(an_identity_rig, consistent_pairs)
    assert np.linalg.norm(theta.reshape(3, 3) - constants.A) < 1e-8
    assert max(fit_residuals(an_identity_rig, consistent_pairs, theta).values()) < 1e-8


def test_unregularized_rank_deficient_fit_raises(an_identity_rig, two_pairs):
    with pytest.raises(UnderdeterminedSystemError) as error:
        fit_rig_params(an_identity_rig, two_pairs)
    assert sorted(error.value.null_parameters) == list(range(9))
    assert unidentified_parameters(an_identity_rig, two_pairs) == list(range(9))


def test_regularized_fit_toward_the_true_rig_recovers_it(an_identity_rig, two_pairs):
    config = CalibrationConfig(epsilon_reg=1e-4, theta_prior=constants.A.ravel())
    theta = fit_rig_params(an_identity_rig, two_pairs, config)
    assert np.linalg.norm(theta.reshape(3, 3) - constants.A) < 1e-3


def test_regularized_fit_keeps_the_prior_on_the_free_direction(an_identity_rig, two_pairs):
    theta = fit_rig_params(an_identity_rig, two_pairs, CalibrationConfig(epsilon_reg=1e-6))
    a_hat = theta.reshape(3, 3)
    for pair in two_pairs:
        np.testing.assert_allclose(a_hat @ pair.c, pair.v, atol=1e-6)


def test_masked_rows_leave_other_rows_at_the_prior(an_identity_rig, consistent_pairs):
    pairs = [mask_geometry(pair, [0]) for pair in consistent_pairs]
    theta = fit_rig_params(an_identity_rig, pairs)
    np.testing.assert_allclose(theta[:3], [-1.0, 0.0, 0.0], atol=1e-10)
    np.testing.assert_array_equal(theta[3:], an_identity_rig.theta[3:])


def test_mask_covering_every_row_matches_the_unmasked_fit(an_identity_rig, consistent_pairs):
    pairs = [mask_geometry(pair, [0, 1, 2]) for pair in consistent_pairs]
    np.testing.assert_allclose(
        fit_rig_params(an_identity_rig, pairs),
        fit_rig_params(an_identity_rig, consistent_pairs),
    )


def test_inactive_parameters_stay_at_the_prior(an_identity_rig, consistent_pairs):
    config = CalibrationConfig(active_param_set=[0, 4, 8])
    theta = fit_rig_params(an_identity_rig, consistent_pairs, config)
    np.testing.assert_allclose(theta.reshape(3, 3), constants.A, atol=1e-10)
    inactive = np.setdiff1d(np.arange(9), [0, 4, 8])
    np.testing.assert_array_equal(theta[inactive], an_identity_rig.theta[inactive])


def test_satisfied_constraint_and_zero_weight_surrogate_leave_the_fit_unchanged(
    an_identity_rig, consistent_pairs
):
    c = np.array([1.0, 1.0, 0.0])
    extra = [
        ExpressionPair("lip seal", c, constants.A @ c, kind=PairKind.CONSTRAINT),
        ExpressionPair("cheek", [1.0, 0.0, 0.0], [5.0, 5.0, 5.0], PairKind.SURROGATE, weight=0.0),
    ]
    theta = fit_rig_params(an_identity_rig, consistent_pairs + extra)
    np.testing.assert_allclose(theta.reshape(3, 3), constants.A, atol=1e-8)


def test_fit_rejects_mismatched_pairs(an_identity_rig):
    with pytest.raises(RigContractError):
        fit_rig_params(an_identity_rig, [ExpressionPair("short", [1.0, 0.0], [1.0, 0.0, 0.0])])
    with pytest.raises(RigContractError):
        fit_rig_params(an_identity_rig, [])


def test_calibration_config_validation():
    with pytest.raises(RigContractError):
        CalibrationConfig(epsilon_reg=-1.0)
    with pytest.raises(ConfigError):
        CalibrationConfig.from_dict({"epsilon": 1.0})

    config = CalibrationConfig.from_dict({"epsilon_reg": 0.5, "active_param_set": [1, 2]})
    assert config.to_dict() == {
        "epsilon_reg": 0.5,
        "theta_prior": None,
        "active_param_set": [1, 2],
    }
