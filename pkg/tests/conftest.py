from pathlib import Path

import numpy as np
import pytest

from rig_tuner.bench import SyntheticSpec, generate_rig
from rig_tuner.repro import constants, pairs_from_columns
from rig_tuner.rigs import JointPsdRig, LinearRig
from rig_tuner.trackers import DirectTracker, SolveMode


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the long repro and validation experiments",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def a_data_folder(tmp_path) -> Path:
    folder = tmp_path / "data"
    folder.mkdir()
    return folder


@pytest.fixture
def a_linear_rig():
    return LinearRig.from_matrix(constants.A, control_names=["brow", "jaw", "lip"])


@pytest.fixture
def an_identity_rig():
    return LinearRig.from_matrix(constants.A_INIT, control_names=["brow", "jaw", "lip"])


@pytest.fixture
def a_joint_psd_rig():
    joint = np.array(
        [
            [1.0, 0.0, 0.5],
            [0.0, 2.0, 0.0],
            [0.3, 0.0, -1.0],
            [0.0, 0.7, 0.2],
        ]
    )
    return JointPsdRig.from_joint_matrix(
        joint, [[0], [1], [0, 1]], 2, control_names=["smile", "squint"]
    )


@pytest.fixture
def consistent_pairs():
    return pairs_from_columns(constants.C, constants.V)


@pytest.fixture
def perturbed_pairs():
    return pairs_from_columns(constants.C, constants.V_HAT)


@pytest.fixture
def a_direct_tracker(a_linear_rig):
    return DirectTracker(a_linear_rig, SolveMode.inverse())


@pytest.fixture
def a_synthetic_spec():
    return SyntheticSpec(
        n_controls=4,
        p_psd=7,
        m_geometry=16,
        sparsity_per_column=4,
        perturb_magnitude=0.1,
        seed=3,
    )


@pytest.fixture
def a_synthetic_rig(a_synthetic_spec):
    return generate_rig(a_synthetic_spec)
