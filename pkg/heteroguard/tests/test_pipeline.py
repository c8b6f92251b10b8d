from pathlib import Path

import numpy as np
import pytest

from blueprint.schemas import PrivacySpec, RunConfig
from core.constants import (
    CHECKPOINT_FILE_NAME,
    CONFIG_ECHO_FILE_NAME,
    EMBEDDINGS_FILE_NAME,
    METRICS_FILE_NAME,
    OUTPUT_ROOT_ENV,
    ObjectiveMetric,
    TaskKind,
)
from core.graph import HeteroGraph
from core.pipeline import (
    PipelineResult,
    echo_run_config,
    flatten_config,
    inflate_config,
    ingest,
    load_run_config,
    message_graph,
    reported_metrics,
    resolve_output_dir,
    restore_run,
    run_pipeline,
    split_target,
)
from utils.exceptions import ConfigurationError, MetaPathSchemaError, PrivacySpecError
from utils.processors import read_tsv

# # Configuration


def test_flat_keys_rebuild_the_same_configuration(fast_config: RunConfig) -> None:
    flat = flatten_config(fast_config)

    assert flat["encoder.heads"] == "2"
    assert flat["privacy.perturb_features"] == "true"
    assert "privacy.noise_multiplier" not in flat
    assert inflate_config(flat) == fast_config


def test_echoed_configuration_replays(fast_config: RunConfig, tmp_path: Path) -> None:
    echo = tmp_path / CONFIG_ECHO_FILE_NAME
    echo_run_config(fast_config, echo)

    assert load_run_config(echo, {}) == fast_config


def test_file_values_and_overrides(fast_config_file: Path) -> None:
    config = load_run_config(fast_config_file, {"seed": "7", "task": None})

    assert config.seed == 7
    assert config.task is TaskKind.LINK_PREDICTION
    assert config.encoder.hidden == 8
    assert config.privacy.iterations == 5


def test_budget_override_replaces_every_budget_key_of_the_file(tmp_path: Path) -> None:
    path = tmp_path / "budget.cfg"
    path.write_text("privacy.epsilon = 1.0\nprivacy.epsilon_f = 0.3\n", encoding="utf-8")

    config = load_run_config(path, {"privacy.epsilon": "0.4"})

    assert config.privacy.budget == 0.4
    assert config.privacy.feature_budget == pytest.approx(0.2)
    assert config.privacy.topology_budget == pytest.approx(0.2)


def test_inconsistent_budget_overrides_are_refused() -> None:
    with pytest.raises(PrivacySpecError):
        load_run_config(
            None,
            {"privacy.epsilon": "1.0", "privacy.epsilon_f": "0.3", "privacy.epsilon_s": "0.3"},
        )


def test_shipped_desk_configuration_matches_the_acceptance_runs(sanity_config: RunConfig) -> None:
    config = load_run_config(Path(__file__).resolve().parents[2] / "configs" / "synthetic.cfg", {})

    assert config.encoder == sanity_config.encoder
    assert config.topology == sanity_config.topology
    assert config.split == sanity_config.split
    assert config.privacy.iterations == sanity_config.privacy.iterations


@pytest.mark.parametrize("key", ["privacy.budget", "model.hidden", "seed.value"])
def test_unknown_keys_are_refused(key: str) -> None:
    with pytest.raises(ConfigurationError):
        inflate_config({key: "1"})


def test_missing_configuration_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigurationError):
        load_run_config(tmp_path / "absent.cfg", {})


def test_output_directory_defaults_to_the_environment_root(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    directory = resolve_output_dir(RunConfig(seed=4), "sweep")

    assert directory.is_dir()
    assert directory.parent == tmp_path
    assert directory.name.startswith("sweep_seed4_")


def test_explicit_output_directory_is_created(tmp_path: Path) -> None:
    directory = resolve_output_dir(RunConfig(out_dir=tmp_path / "nested" / "run"), "train")

    assert directory == tmp_path / "nested" / "run"
    assert directory.is_dir()


def test_reported_metrics_follow_the_task() -> None:
    assert reported_metrics(RunConfig()) == (ObjectiveMetric.VALIDATION_AUC, ObjectiveMetric.TEST_AUC)
    assert reported_metrics(RunConfig(task=TaskKind.NODE_CLASSIFICATION)) == (
        ObjectiveMetric.MICRO_F1,
        ObjectiveMetric.VALIDATION_AUC,
    )


# # Stages


def test_ingest_narrows_the_metapaths() -> None:
    graph = ingest(RunConfig.parse_obj({"dataset": {"metapaths": "PAP,APA"}}))

    assert set(graph.schema.metapaths) == {"PAP", "APA"}


def test_ingest_refuses_an_unknown_metapath() -> None:
    with pytest.raises(MetaPathSchemaError) as caught:
        ingest(RunConfig.parse_obj({"dataset": {"metapaths": ["PAP", "XYZ"]}}))

    assert caught.value.stage is not None


def test_ingest_generates_a_missing_synthetic_dataset(tmp_path: Path) -> None:
    graph = ingest(RunConfig.parse_obj({"dataset": {"path": str(tmp_path / "ds"), "synthetic": True}}))

    assert graph.node_counts == {"paper": 120, "author": 150, "field": 30}


def test_message_graph_keeps_only_training_edges(synthetic_graph: HeteroGraph) -> None:
    config = RunConfig()
    split = split_target(synthetic_graph, config)
    trimmed = message_graph(synthetic_graph, split)
    relation = split.relation

    assert trimmed.edge_count(relation) == split.train.shape[0]
    assert trimmed.edge_count(relation) < synthetic_graph.edge_count(relation)

    for other in synthetic_graph.schema.relations:
        if other != relation:
            assert trimmed.edge_count(other) == synthetic_graph.edge_count(other)


# # Runs


@pytest.mark.slow
def test_runs_are_reproducible(fast_config: RunConfig) -> None:
    first = run_pipeline(fast_config, write_artifacts=False)
    second = run_pipeline(fast_config, write_artifacts=False)

    for left, right in zip(first.records, second.records):
        assert left.metric == right.metric
        assert left.value == pytest.approx(right.value, abs=1e-9)

    value = first.record(ObjectiveMetric.TEST_AUC).value
    assert value is not None and 0.0 <= value <= 1.0


@pytest.mark.slow
def test_node_classification_run(fast_config: RunConfig) -> None:
    result = run_pipeline(
        fast_config.copy(
            update={
                "task": TaskKind.NODE_CLASSIFICATION,
                "evaluation": fast_config.evaluation.copy(update={"objective": ObjectiveMetric.MICRO_F1}),
            }
        ),
        write_artifacts=False,
    )
    value = result.record(ObjectiveMetric.MICRO_F1).value

    assert value is not None and 0.0 <= value <= 1.0


@pytest.mark.slow
def test_artifacts_restore_the_run(fast_config: RunConfig, tmp_path: Path) -> None:
    config = fast_config.copy(update={"out_dir": tmp_path / "run"})
    result = run_pipeline(config)

    assert (tmp_path / "run" / CHECKPOINT_FILE_NAME).is_file()
    assert (tmp_path / "run" / METRICS_FILE_NAME).is_file()

    restored = restore_run(tmp_path / "run" / CHECKPOINT_FILE_NAME)

    assert restored.config.privacy == result.config.privacy
    assert restored.split.test.tolist() == result.split.test.tolist()


@pytest.mark.slow
def test_privacy_off_skips_the_accountant(fast_config: RunConfig) -> None:
    config = fast_config.copy(
        update={"privacy": PrivacySpec(perturb_features=False, perturb_topology=False, iterations=5)}
    )
    result = run_pipeline(config, write_artifacts=False)

    assert result.embeddings.feature_sigma == 0.0
    assert result.training.noise_multiplier == 0.0


@pytest.mark.slow
def test_released_embeddings_are_the_perturbed_encoder_output(fast_config: RunConfig, tmp_path: Path) -> None:
    result = run_pipeline(fast_config.copy(update={"out_dir": tmp_path / "run"}))
    rows = read_tsv(tmp_path / "run" / EMBEDDINGS_FILE_NAME)

    assert len(rows) == sum(result.graph.node_counts.values())

    for each_type in result.graph.schema.node_types:
        released = {row[0]: row for row in rows if row[1] == each_type}

        assert list(released) == list(result.graph.node_ids[each_type])

        for position, each_id in enumerate(result.graph.node_ids[each_type]):
            np.testing.assert_array_equal(
                np.array(released[each_id][2:], dtype=np.float64),
                result.embeddings.perturbed[each_type][position],
            )


@pytest.mark.slow
def test_noise_free_run_learns_the_target_relation(clean_sanity_run: PipelineResult) -> None:
    report = clean_sanity_run.training.report
    validation = clean_sanity_run.record(ObjectiveMetric.VALIDATION_AUC).value
    test = clean_sanity_run.record(ObjectiveMetric.TEST_AUC).value

    assert len(report.epochs) == 100
    assert report.best_val_auc is not None and report.best_val_auc >= 0.85
    assert validation is not None and validation >= 0.85
    assert test is not None and test >= 0.75
