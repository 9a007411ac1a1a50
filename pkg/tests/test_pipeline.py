import csv
import json

import numpy as np
import pytest

from rig_tuner.bench import (
    SyntheticSpec,
    generate_corpus,
    generate_rig,
    make_calibration_templates,
    perturb_rig,
)
from rig_tuner.core import (
    LineSearch,
    OptimizerConfig,
    PipelineConfig,
    PipelineMode,
    StageId,
    expression_errors,
    run_pipeline,
)
from rig_tuner.trackers import (
    ControlPerturbation,
    CountingTracker,
    DirectTracker,
    PerturbationMode,
    PerturbedTracker,
    SolveMode,
)
from rig_tuner.utils.errors import ConfigError, PipelineConfigError


@pytest.fixture
def a_counting_tracker(a_synthetic_rig):
    return CountingTracker(DirectTracker(a_synthetic_rig, SolveMode.lm(1e-8)))


@pytest.fixture
def single_control_pairs(a_synthetic_rig):
    templates = make_calibration_templates(a_synthetic_rig)[: a_synthetic_rig.n_controls]
    return generate_corpus(a_synthetic_rig, a_synthetic_rig.theta, templates).pairs


@pytest.fixture
def a_pipeline_config():
    return PipelineConfig(
        mode=PipelineMode.BLACK_BOX,
        primary_controls=["ctrl_000", 1],
        optimizer=OptimizerConfig(step_size=0.1, max_iters=10, line_search=LineSearch.HALVING),
    )


def test_default_stage_orders():
    assert PipelineConfig().stages[0] == StageId.S1_DECIMATED
    assert len(PipelineConfig().stages) == 4
    assert PipelineConfig(mode="black_box").stages == [
        StageId.S2_FILTERED_PRIMARY,
        StageId.S3_SPURIOUS_SUPPRESSION,
        StageId.S4_SPURIOUS_COLUMNS,
    ]
    assert PipelineConfig(stage_order=["s3_spurious_suppression"]).stages == [
        StageId.S3_SPURIOUS_SUPPRESSION
    ]


def test_black_box_pipeline_refuses_decimation_before_tracking(
    a_synthetic_rig, a_counting_tracker, single_control_pairs
):
    config = PipelineConfig(
        mode="black_box",
        stage_order=["s1_decimated", "s2_filtered_primary"],
        primary_controls=[0],
    )
    with pytest.raises(PipelineConfigError, match="black-box"):
        run_pipeline(
            config, single_control_pairs, a_synthetic_rig.theta, a_counting_tracker, a_synthetic_rig
        )
    assert a_counting_tracker.evaluation_count == 0


def test_decimated_stage_needs_a_capable_tracker(a_synthetic_rig):
    perturbation = ControlPerturbation.constant(PerturbationMode.T1_ADDITIVE, np.zeros(4))
    tracker = PerturbedTracker(a_synthetic_rig, perturbation)
    with pytest.raises(PipelineConfigError, match="supporting decimation"):
        PipelineConfig(primary_controls=[0]).check(tracker)


def test_pipeline_config_checks(a_counting_tracker):
    with pytest.raises(PipelineConfigError, match="repeats"):
        PipelineConfig(
            stage_order=["s2_filtered_primary", "s2_filtered_primary"], primary_controls=[0]
        ).check(a_counting_tracker)
    with pytest.raises(PipelineConfigError, match="primary control"):
        PipelineConfig().check(a_counting_tracker)
    with pytest.raises(PipelineConfigError):
        PipelineConfig(jobs=0)
    assert PipelineConfig(stage_order=[]).check(a_counting_tracker).stages == []


def test_control_sets_resolve_names(a_synthetic_rig):
    config = PipelineConfig(primary_controls=["ctrl_001", 0, 1])
    assert config.control_sets(a_synthetic_rig) == ([0, 1], [2, 3])

    config = PipelineConfig(primary_controls=[0], spurious_controls=["ctrl_003"])
    assert config.control_sets(a_synthetic_rig) == ([0], [3])


def test_pipeline_config_round_trips_through_dicts(a_pipeline_config):
    content = a_pipeline_config.to_dict()
    assert json.loads(json.dumps(content)) == content
    assert PipelineConfig.from_dict(content).to_dict() == content
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"stages": ["s2_filtered_primary"]})


def test_expression_errors_at_the_true_rig(
    a_synthetic_rig, a_counting_tracker, single_control_pairs
):
    errors = expression_errors(
        single_control_pairs,
        a_counting_tracker,
        a_synthetic_rig,
        a_synthetic_rig.theta,
        [0, 1],
        [2, 3],
    )
    assert errors.names == [pair.name for pair in single_control_pairs]
    assert errors.primary_total == pytest.approx(0.0, abs=1e-10)
    assert errors.spurious_total == pytest.approx(0.0, abs=1e-5)


def test_black_box_pipeline_chains_its_stages(
    tmp_path, a_synthetic_rig, a_counting_tracker, single_control_pairs, a_pipeline_config
):
    theta_init = perturb_rig(a_synthetic_rig, 0.1, 4)
    report = run_pipeline(
        a_pipeline_config, single_control_pairs, theta_init, a_counting_tracker, a_synthetic_rig
    )

    assert [result.stage_id for result in report.stages] == a_pipeline_config.stages
    np.testing.assert_array_equal(report.theta_init, theta_init)
    np.testing.assert_array_equal(report.theta_final, report.stages[-1].theta_out)
    for previous, result in zip(report.stages, report.stages[1:], strict=False):
        np.testing.assert_array_equal(result.theta_in, previous.theta_out)
    for previous, summary in zip(report.summaries, report.summaries[1:], strict=False):
        assert summary.before is previous.after
    assert report.final is report.summaries[-1].after
    assert report.initial.primary_total > 0.0

    frozen = a_synthetic_rig.params_of_controls([0, 1])
    s4 = report.stages[-1]
    np.testing.assert_array_equal(s4.theta_out[frozen], s4.theta_in[frozen])

    with report.write_summary_csv(tmp_path / "stage_summary.csv").open() as f:
        rows = list(csv.reader(f))
    assert rows[0][:2] == ["stage", "expression"]
    assert len(rows) == 1 + 3 * len(single_control_pairs)
    assert rows[1][0] == "s2_filtered_primary"

    content = report.to_dict()
    assert content["mode"] == "black_box"
    assert [stage["stage"] for stage in content["stages"]] == [
        "s2_filtered_primary",
        "s3_spurious_suppression",
        "s4_spurious_columns",
    ]
    json.dumps(content)


def test_pipeline_runs_are_deterministic(
    a_synthetic_rig, single_control_pairs, a_pipeline_config
):
    theta_init = perturb_rig(a_synthetic_rig, 0.1, 4)
    results = []
    for jobs in (1, 2):
        config = PipelineConfig.from_dict({**a_pipeline_config.to_dict(), "jobs": jobs})
        tracker = DirectTracker(a_synthetic_rig, SolveMode.lm(1e-8))
        report = run_pipeline(config, single_control_pairs, theta_init, tracker, a_synthetic_rig)
        results.append(report.theta_final)
    np.testing.assert_array_equal(results[0], results[1])


def _assert_primary_error_never_rises(report):
    for summary in report.summaries:
        before, after = summary.before.primary_total, summary.after.primary_total
        assert after <= before * (1.0 + 1e-9), summary.stage_id


def test_open_source_pipeline_never_raises_the_primary_error(
    a_synthetic_rig, single_control_pairs
):
    rig = a_synthetic_rig
    config = PipelineConfig(
        primary_controls=[0, 1],
        optimizer=OptimizerConfig(step_size=0.1, max_iters=10, line_search=LineSearch.HALVING),
    )
    tracker = CountingTracker(DirectTracker(rig, SolveMode.lm(0.05)))
    report = run_pipeline(config, single_control_pairs, perturb_rig(rig, 0.1, 4), tracker, rig)

    assert [summary.stage_id for summary in report.summaries] == config.stages
    _assert_primary_error_never_rises(report)
    assert report.final.primary_total < report.initial.primary_total
    content = report.to_dict()
    assert [stage["accepted"] for stage in content["stages"]] == [
        result.accepted.value for result in report.stages
    ]


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["open_source", "black_box"])
def test_desk_pipeline_smoke(monkeypatch, mode):
    rig = generate_rig(SyntheticSpec())
    templates = make_calibration_templates(rig)[: rig.n_controls]
    pairs = generate_corpus(rig, rig.theta, templates).pairs
    inner = DirectTracker(rig, SolveMode.lm(0.05))
    if mode == "black_box":

        def refuse(_problem):
            _error_msg = "black-box pipelines must not decimate"
            raise AssertionError(_error_msg)

        monkeypatch.setattr(inner, "decimate", refuse)
    config = PipelineConfig(
        mode=mode,
        primary_controls=np.flatnonzero(rig.primary_mask).tolist(),
        optimizer=OptimizerConfig(step_size=0.1, max_iters=40, line_search=LineSearch.HALVING),
    )
    theta_init = perturb_rig(rig, 0.1, 7)

    reports = [
        run_pipeline(config, pairs, theta_init, CountingTracker(inner), rig) for _ in range(2)
    ]
    np.testing.assert_array_equal(reports[0].theta_final, reports[1].theta_final)
    _assert_primary_error_never_rises(reports[0])
    assert len(reports[0].stages) == len(config.stages)
