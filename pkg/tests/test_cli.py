import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from rig_tuner.bench import generate_corpus, generate_rig, make_calibration_templates, perturb_rig
from rig_tuner.cli import ExperimentConfig, main, parse_args
from rig_tuner.cli.cli import EXIT_ERROR, EXIT_OK
from rig_tuner.rigs import RigIO
from rig_tuner.trackers import DirectTracker, SubprocessTracker
from rig_tuner.utils.errors import ConfigError
from rig_tuner.utils.file_access import read_json, write_json


@pytest.fixture
def an_experiment_folder(a_data_folder, a_synthetic_rig):
    rig = a_synthetic_rig
    templates = make_calibration_templates(rig)[: rig.n_controls]
    generate_corpus(rig, rig.theta, templates).save(a_data_folder)
    RigIO.save_rig(rig.with_theta(perturb_rig(rig, 0.1, 4)), a_data_folder / "rig.json")
    return a_data_folder


@pytest.fixture
def a_finetune_config(an_experiment_folder):
    content = {
        "format_version": 1,
        "rig": "rig.json",
        "expressions": "train.json",
        "geometry": "train_geometry.json",
        "calibration": {"epsilon_reg": 1e-3},
        "pipeline": {
            "mode": "black_box",
            "primary_controls": ["ctrl_000", "ctrl_001"],
            "optimizer": {"step_size": 0.1, "max_iters": 5, "line_search": "halving"},
        },
    }
    return write_json(an_experiment_folder / "finetune.json", content)


def _edited_config(path, **changes):
    content = read_json(path)
    content.update(changes)
    return write_json(path.parent / "edited.json", content)


def test_experiment_paths_resolve_next_to_the_config(a_finetune_config, an_experiment_folder):
    config = ExperimentConfig.load(a_finetune_config)
    assert config.rig == an_experiment_folder.resolve() / "rig.json"
    assert config.theta_init is None
    assert config.pipeline.primary_controls == ["ctrl_000", "ctrl_001"]

    rig = config.load_rig()
    assert isinstance(config.make_tracker(rig), DirectTracker)
    np.testing.assert_array_equal(config.load_theta_init(rig), rig.theta)
    assert len(config.load_pairs(rig)) == 4

    tracker = config.replace(tracker="subprocess:./my_tracker --fast").make_tracker(rig)
    assert isinstance(tracker, SubprocessTracker)
    assert ExperimentConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()


@pytest.mark.parametrize(
    "changes",
    [
        {"format_version": 2},
        {"trackers": "builtin"},
        {"pipeline": {"jobs": 0}},
        {"calibration": {"epsilon_reg": -1.0}},
    ],
)
def test_invalid_experiment_configs(a_finetune_config, changes):
    with pytest.raises(ConfigError) as error:
        ExperimentConfig.load(_edited_config(a_finetune_config, **changes))
    assert error.value.path is not None


def test_theta_init_must_share_the_rig_layout(
    a_finetune_config, an_experiment_folder, a_synthetic_spec
):
    config = ExperimentConfig.load(a_finetune_config)
    rig = config.load_rig()

    moved = perturb_rig(rig, 0.05, 9)
    RigIO.save_rig(rig.with_theta(moved), an_experiment_folder / "theta_init.json")
    config = config.replace(theta_init=an_experiment_folder / "theta_init.json")
    np.testing.assert_allclose(config.load_theta_init(rig), moved)

    other = generate_rig(replace(a_synthetic_spec, seed=a_synthetic_spec.seed + 1))
    assert other.n_params == rig.n_params
    RigIO.save_rig(other, an_experiment_folder / "theta_init.json")
    with pytest.raises(ConfigError, match="sparsity pattern") as error:
        config.load_theta_init(rig)
    assert error.value.path == an_experiment_folder / "theta_init.json"


def test_unknown_tracker_kind(a_finetune_config):
    config = ExperimentConfig.load(a_finetune_config).replace(tracker="socket:1234")
    with pytest.raises(ConfigError):
        config.make_tracker(config.load_rig())


def test_repro_command_writes_tables_and_manifest(tmp_path, capsys):
    out = tmp_path / "results"
    assert main(["repro", "fig1", "fig2", "fig1", "--out", str(out)]) == EXIT_OK

    assert capsys.readouterr().out.splitlines() == ["fig1: passed", "fig2: passed"]
    assert (out / "fig1" / "fig1_trajectory.csv").is_file()
    assert (out / "fig2" / "fig2_cells.csv").is_file()
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "repro"
    assert [result["target"] for result in manifest["results"]] == ["fig1", "fig2"]
    assert "fig1/fig1_cells.csv" in manifest["artifacts"]


def test_repro_rejects_unknown_targets():
    with pytest.raises(SystemExit):
        parse_args(["repro", "table9"])


def test_calibrate_command(tmp_path, a_finetune_config):
    out = tmp_path / "calibrated"
    assert main(["calibrate", "--config", str(a_finetune_config), "--out", str(out)]) == EXIT_OK

    rig = RigIO.load_rig(out / "calibrated_rig.json")
    assert rig.n_params == 28
    report = read_json(out / "calibration_report.json")
    assert set(report) == {"residuals", "augmented", "masked"}
    manifest = read_json(out / "manifest.json")
    assert manifest["artifacts"] == [
        "augmented_expressions.json",
        "calibrated_rig.json",
        "calibration_report.json",
    ]


def test_finetune_command(tmp_path, a_finetune_config):
    out = tmp_path / "tuned"
    argv = ["finetune", "--config", str(a_finetune_config), "--out", str(out), "--jobs", "2"]
    assert main(argv) == EXIT_OK

    tuned = RigIO.load_rig(out / "tuned_rig.json")
    report = read_json(out / "pipeline_report.json")
    np.testing.assert_array_equal(tuned.theta, report["theta_final"])
    assert [stage["stage"] for stage in report["stages"]] == [
        "s2_filtered_primary",
        "s3_spurious_suppression",
        "s4_spurious_columns",
    ]
    with (out / "s2_filtered_primary" / "unit_000_trace.csv").open() as f:
        assert next(csv.reader(f))[0] == "iteration"
    assert (out / "s4_spurious_columns" / "unit_000_trajectory.csv").is_file()
    assert "stage_summary.csv" in read_json(out / "manifest.json")["artifacts"]


def test_finetune_command_is_deterministic(tmp_path, a_finetune_config):
    outputs = []
    for name, jobs in (("first", "1"), ("second", "3")):
        out = tmp_path / name
        argv = ["finetune", "--config", str(a_finetune_config), "--out", str(out), "--jobs", jobs]
        assert main(argv) == EXIT_OK
        outputs.append((out / "tuned_rig.json").read_bytes())
    assert outputs[0] == outputs[1]


def test_black_box_decimation_is_an_input_error(tmp_path, a_finetune_config):
    content = read_json(a_finetune_config)
    content["pipeline"]["stage_order"] = ["s1_decimated"]
    config = write_json(a_finetune_config.parent / "decimated.json", content)
    out = tmp_path / "refused"
    assert main(["finetune", "--config", str(config), "--out", str(out)]) == EXIT_ERROR
    assert not (out / "tuned_rig.json").exists()


def test_missing_config_is_an_input_error(tmp_path):
    missing = tmp_path / "missing.json"
    assert main(["calibrate", "--config", str(missing), "--out", str(tmp_path)]) == EXIT_ERROR


def test_broken_tracker_command_is_an_input_error(tmp_path, a_finetune_config):
    argv = [
        "finetune",
        "--config",
        str(a_finetune_config),
        "--out",
        str(tmp_path / "broken"),
        "--tracker",
        "subprocess:/nonexistent/tracker",
    ]
    assert main(argv) == EXIT_ERROR


def test_manifest_lists_the_config(tmp_path, a_finetune_config):
    out = tmp_path / "seeded"
    argv = ["finetune", "--config", str(a_finetune_config), "--out", str(out), "--seed", "7"]
    assert main(argv) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["pipeline"]["optimizer"]["seed"] == 7
