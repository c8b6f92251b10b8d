"""
Pipeline (pipeline.py) | Wires ingestion, feature learning, feature noise, private topology learning and evaluation into one run, and owns the flat configuration format.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from logging import Logger, getLogger
from pathlib import Path
from time import perf_counter
from typing import Any, Mapping

import numpy as np
import torch
from dotenv import dotenv_values
from frozendict import frozendict
from pydantic import BaseModel

from blueprint.schemas import MetricsRecord, RunConfig
from core.allocator import AllocationEvaluator, FeasibilityCheck
from core.attention import (
    HeteroAttentionEncoder,
    PerturbedEmbeddings,
    attention_report,
    build_encoder,
    encode_with_privacy,
    fit_encoder,
)
from core.constants import (
    ATTENTION_REPORT_FILE_NAME,
    CHECKPOINT_FILE_NAME,
    CONFIG_ECHO_FILE_NAME,
    EMBEDDINGS_FILE_NAME,
    LOGGER_NAME,
    METRICS_FILE_NAME,
    SCHEMA_FILE_NAME,
    SYNTHETIC_DATASET_SEED,
    TRAIN_REPORT_FILE_NAME,
    MetaPathName,
    ObjectiveMetric,
    PipelineStage,
    RunStatus,
    TaskKind,
)
from core.decorators import pipeline_stage
from core.dependencies import get_output_root
from core.evaluation import (
    link_prediction_auc,
    node_classification_f1,
    with_budget,
    write_metrics_jsonl,
)
from core.graph import (
    EdgeSplit,
    HeteroGraph,
    SemanticSubgraph,
    extract_semantic_subgraph,
    load_dataset,
    load_labels,
    split_edges,
)
from core.privacy import accountant_feasible
from core.synthetic import generate_synthetic_dataset, generate_synthetic_graph
from core.vgae import (
    TopologyContext,
    TrainResult,
    VgaeParams,
    build_context,
    encode,
    load_checkpoint,
    resolve_topology_privacy,
    save_checkpoint,
    score_pairs,
    to_global,
    train,
)
from utils.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    MetaPathSchemaError,
)
from utils.processors import write_json, write_jsonl, write_tsv

logger: Logger = getLogger(LOGGER_NAME)

TOP_LEVEL_KEYS: tuple[str, ...] = ("task", "out_dir", "seed")

# # Configuration — START


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"

    if isinstance(value, Enum):
        return str(value.value)

    if isinstance(value, float):
        return repr(value)

    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(each) for each in value)

    return str(value)


def flatten_config(config: RunConfig) -> dict[str, str]:
    """
    The `section.key -> value` lines of a configuration. Unset optional values are left out.
    """
    flat: dict[str, str] = {}

    for each_key in TOP_LEVEL_KEYS:
        value = getattr(config, each_key)

        if value is not None:
            flat[each_key] = _format_value(value)

    for each_section in config.__fields__:
        if each_section in TOP_LEVEL_KEYS:
            continue

        section: BaseModel = getattr(config, each_section)

        for each_key, value in section.dict().items():
            if value is not None:
                flat[f"{each_section}.{each_key}"] = _format_value(value)

    return flat


def inflate_config(flat: Mapping[str, str | None]) -> RunConfig:
    """
    Builds a `RunConfig` from flat keys. Unknown sections and keys are refused.

    Raises:
        ConfigurationError: On an unknown key.
        pydantic.ValidationError: On a value the models refuse.
    """
    nested: dict[str, Any] = {}

    for each_key, value in flat.items():
        if value is None or value == "":
            continue

        if each_key in TOP_LEVEL_KEYS:
            nested[each_key] = value
            continue

        section, _, key = each_key.partition(".")
        section_field = RunConfig.__fields__.get(section)

        if section_field is None or section in TOP_LEVEL_KEYS:
            raise ConfigurationError(f"Unknown configuration section in `{each_key}`.")

        if key not in section_field.type_.__fields__:
            raise ConfigurationError(f"Unknown configuration key `{each_key}`.")

        nested.setdefault(section, {})[key] = value

    return RunConfig.parse_obj(nested)


def load_run_config(path: Path | None, overrides: Mapping[str, str | None]) -> RunConfig:
    """
    Reads the flat configuration file and applies the command-line overrides over it. When an override touches the budget, every budget key of the file is dropped so the two sources never disagree.
    """
    flat: dict[str, str | None] = {}

    if path is not None:
        if not path.is_file():
            raise ConfigurationError(f"The configuration file `{path}` does not exist.")

        flat.update(dotenv_values(path, interpolate=False))
        logger.info(f"Configuration loaded from `{path}`.")

    budget_keys: tuple[str, ...] = ("privacy.epsilon", "privacy.epsilon_f", "privacy.epsilon_s")
    given = {key: value for key, value in overrides.items() if value is not None}

    if any(each in given for each in budget_keys):
        for each in budget_keys:
            flat.pop(each, None)

    flat.update(given)
    return inflate_config(flat)


def echo_run_config(config: RunConfig, path: Path) -> None:
    lines: list[str] = [f"{key} = {value}" for key, value in flatten_config(config).items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Configuration echoed to `{path}`.")


def resolve_output_dir(config: RunConfig, label: str) -> Path:
    directory: Path = config.out_dir or get_output_root() / (
        f"{label}_seed{config.seed}_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
    )
    directory.mkdir(parents=True, exist_ok=True)
    return directory


# # Configuration — END

# # Stages — START


@pipeline_stage(stage=PipelineStage.INGEST)
def ingest(config: RunConfig) -> HeteroGraph:
    """
    Loads the dataset, generating the synthetic one first when asked, and narrows the schema to the configured meta-paths and task types.
    """
    path: Path | None = config.dataset.path

    if path is None:
        graph: HeteroGraph = generate_synthetic_graph(SYNTHETIC_DATASET_SEED)
    else:
        if config.dataset.synthetic and not (path / SCHEMA_FILE_NAME).is_file():
            generate_synthetic_dataset(path, SYNTHETIC_DATASET_SEED)

        graph = load_dataset(path)

    schema = graph.schema

    if config.dataset.metapaths is not None:
        unknown: list[str] = [each for each in config.dataset.metapaths if each not in schema.metapaths]

        if unknown:
            raise MetaPathSchemaError(f"Unknown meta-path(s) {unknown}.")

        schema = replace(
            schema,
            metapaths=frozendict(
                {MetaPathName(each): schema.metapaths[MetaPathName(each)] for each in config.dataset.metapaths}
            ),
        )

    if config.dataset.target_relation is not None:
        if config.dataset.target_relation not in schema.relations:
            raise ConfigurationError(f"Unknown target relation `{config.dataset.target_relation}`.")

        schema = replace(schema, target_relation=config.dataset.target_relation)

    if config.dataset.classify_type is not None:
        if config.dataset.classify_type not in schema.node_types:
            raise ConfigurationError(f"Unknown classification type `{config.dataset.classify_type}`.")

        schema = replace(schema, classify_type=config.dataset.classify_type)

    return replace(graph, schema=schema)


@pipeline_stage(stage=PipelineStage.SPLIT)
def split_target(graph: HeteroGraph, config: RunConfig) -> EdgeSplit:
    relation = graph.schema.target_relation

    if relation is None:
        raise ConfigurationError(
            "The schema declares no target relation, set `target` in the schema or `dataset.target_relation`."
        )

    split: EdgeSplit = split_edges(graph, relation, config.split.ratios, config.seed)
    logger.info(
        f"Split `{relation}`: {split.train.shape[0]} train, {split.val.shape[0]} validation, {split.test.shape[0]} test edge(s)."
    )
    return split


def message_graph(graph: HeteroGraph, split: EdgeSplit) -> HeteroGraph:
    """
    The graph without the validation and test edges of the split relation.
    """
    signature = graph.schema.relations[split.relation]
    source_ids = graph.node_ids[signature.source]
    target_ids = graph.node_ids[signature.target]

    return graph.with_edges(
        split.relation,
        [(source_ids[source], target_ids[target]) for source, target in split.train.tolist()],
    )


@pipeline_stage(stage=PipelineStage.SUBGRAPHS)
def semantic_subgraphs(graph: HeteroGraph) -> dict[MetaPathName, SemanticSubgraph]:
    subgraphs: dict[MetaPathName, SemanticSubgraph] = {
        name: extract_semantic_subgraph(graph, each) for name, each in graph.schema.metapaths.items()
    }

    for name, each in subgraphs.items():
        logger.info(f"Meta-path `{name}`: {each.pairs.shape[0]} pair(s) over {each.num_nodes} node(s).")

    return subgraphs


@pipeline_stage(stage=PipelineStage.FEATURE_LEARNING)
def learn_features(
    graph: HeteroGraph, subgraphs: Mapping[MetaPathName, SemanticSubgraph], config: RunConfig
) -> HeteroAttentionEncoder:
    encoder = build_encoder(graph, subgraphs, config.encoder, config.seed)
    fit_encoder(encoder, graph, subgraphs, config.encoder, config.seed)
    return encoder


@pipeline_stage(stage=PipelineStage.FEATURE_NOISE)
def perturb_features(
    graph: HeteroGraph,
    subgraphs: Mapping[MetaPathName, SemanticSubgraph],
    encoder: HeteroAttentionEncoder,
    config: RunConfig,
) -> PerturbedEmbeddings:
    return encode_with_privacy(graph, subgraphs, encoder, config.privacy, config.seed)


@pipeline_stage(stage=PipelineStage.TOPOLOGY_LEARNING)
def learn_topology(
    graph: HeteroGraph, split: EdgeSplit, embeddings: PerturbedEmbeddings, config: RunConfig
) -> TrainResult:
    return train(graph, split, embeddings.perturbed, config.topology, config.privacy, config.seed)


# # Stages — END

# # Scoring — START


@pipeline_stage(stage=PipelineStage.EVALUATION)
def score_run(
    graph: HeteroGraph,
    split: EdgeSplit,
    context: TopologyContext,
    params: VgaeParams,
    config: RunConfig,
    metrics: tuple[ObjectiveMetric, ...],
) -> dict[ObjectiveMetric, float | None]:
    """
    Scores the latent means. An AUC whose positives or negatives are empty is None.
    """
    with torch.no_grad():
        mu = encode(context, params).mu

    scores: dict[ObjectiveMetric, float | None] = {}
    tagged = {
        ObjectiveMetric.VALIDATION_AUC: (split.val, split.val_neg),
        ObjectiveMetric.TEST_AUC: (split.test, split.test_neg),
    }

    for each_metric in metrics:
        if each_metric is ObjectiveMetric.MICRO_F1:
            classify_type = graph.schema.classify_type

            if classify_type is None:
                raise ConfigurationError(
                    "Node classification needs `classify` in the schema or `dataset.classify_type`."
                )

            offset: int = context.offsets[classify_type]
            rows = mu[offset : offset + graph.node_count(classify_type)].numpy()
            scores[each_metric] = node_classification_f1(
                rows,
                load_labels(graph, classify_type),
                seed=config.seed,
                train_fraction=config.evaluation.nc_train_fraction,
            )
            continue

        positives, negatives = tagged[each_metric]

        if not positives.shape[0] or not negatives.shape[0]:
            scores[each_metric] = None
            continue

        scores[each_metric] = link_prediction_auc(
            score_pairs(mu, to_global(context, positives)).tolist(),
            score_pairs(mu, to_global(context, negatives)).tolist(),
        )

    return scores


def reported_metrics(config: RunConfig) -> tuple[ObjectiveMetric, ...]:
    task_metrics: tuple[ObjectiveMetric, ...] = (
        (ObjectiveMetric.VALIDATION_AUC, ObjectiveMetric.TEST_AUC)
        if config.task is TaskKind.LINK_PREDICTION
        else (ObjectiveMetric.MICRO_F1,)
    )

    if config.evaluation.objective not in task_metrics:
        task_metrics = (*task_metrics, config.evaluation.objective)

    return task_metrics


def metrics_records(
    config: RunConfig, scores: Mapping[ObjectiveMetric, float | None], runtime: float
) -> list[MetricsRecord]:
    return [
        MetricsRecord(
            task=config.task,
            dataset=str(config.dataset.path or "synthetic"),
            metric=each_metric.value,
            value=value,
            seed=config.seed,
            epsilon=config.privacy.budget,
            epsilon_f=config.privacy.epsilon_f,
            epsilon_s=config.privacy.epsilon_s,
            delta=config.privacy.delta,
            perturb_features=config.privacy.perturb_features,
            perturb_topology=config.privacy.perturb_topology,
            status=RunStatus.OK if value is not None else RunStatus.FAILED,
            runtime=runtime,
            detail=None if value is not None else "The split has no pair to score.",
        )
        for each_metric, value in scores.items()
    ]


# # Scoring — END

# # Runs — START


@dataclass(frozen=True, eq=False)
class PipelineResult:
    config: RunConfig
    graph: HeteroGraph
    split: EdgeSplit
    embeddings: PerturbedEmbeddings
    training: TrainResult
    context: TopologyContext
    records: list[MetricsRecord]
    output_dir: Path | None

    def record(self, metric: ObjectiveMetric) -> MetricsRecord:
        for each in self.records:
            if each.metric == metric.value:
                return each

        raise InvalidArgumentError(f"The run did not report `{metric.value}`.")


def run_pipeline(config: RunConfig, *, write_artifacts: bool = True, label: str = "train") -> PipelineResult:
    """
    One end-to-end run: semantic subgraphs, attention encoding, calibrated feature noise, then the privately trained topology autoencoder on the noised embeddings.

    The artifacts (configuration echo, checkpoint, embeddings, attention report, training report and metrics) are written unless `write_artifacts` is False.
    """
    started: float = perf_counter()
    output_dir: Path | None = resolve_output_dir(config, label) if write_artifacts else None

    if output_dir is not None:
        echo_run_config(config, output_dir / CONFIG_ECHO_FILE_NAME)

    graph: HeteroGraph = ingest(config)
    split: EdgeSplit = split_target(graph, config)
    training_graph: HeteroGraph = message_graph(graph, split)
    subgraphs = semantic_subgraphs(training_graph)
    encoder = learn_features(training_graph, subgraphs, config)
    embeddings: PerturbedEmbeddings = perturb_features(training_graph, subgraphs, encoder, config)
    training: TrainResult = learn_topology(graph, split, embeddings, config)
    context: TopologyContext = build_context(graph, split, embeddings.perturbed)
    scores = score_run(graph, split, context, training.params, config, reported_metrics(config))
    records: list[MetricsRecord] = metrics_records(config, scores, perf_counter() - started)

    if output_dir is not None:
        export_run(output_dir, config, graph, embeddings, training, records)

    return PipelineResult(
        config=config,
        graph=graph,
        split=split,
        embeddings=embeddings,
        training=training,
        context=context,
        records=records,
        output_dir=output_dir,
    )


@pipeline_stage(stage=PipelineStage.EXPORT)
def export_run(
    output_dir: Path,
    config: RunConfig,
    graph: HeteroGraph,
    embeddings: PerturbedEmbeddings,
    training: TrainResult,
    records: list[MetricsRecord],
) -> None:
    """
    Writes the checkpoint, the released embeddings (node id, node type, then the perturbed fused embedding), the attention report, the training trace and the metrics.
    """
    save_checkpoint(
        output_dir / CHECKPOINT_FILE_NAME,
        params=training.params,
        spec=training.spec,
        seed=config.seed,
        ledger=training.ledger,
        features=embeddings.perturbed,
        config=flatten_config(config),
    )

    write_tsv(
        output_dir / EMBEDDINGS_FILE_NAME,
        [
            [each_id, each_type, *embeddings.perturbed[each_type][position].tolist()]
            for each_type in graph.schema.node_types
            for position, each_id in enumerate(graph.node_ids[each_type])
        ],
        header_comment="node_id, node_type, perturbed embedding",
    )
    write_json(output_dir / ATTENTION_REPORT_FILE_NAME, attention_report(embeddings, config.privacy))
    write_jsonl(output_dir / TRAIN_REPORT_FILE_NAME, training.report.epochs)
    write_metrics_jsonl(output_dir / METRICS_FILE_NAME, records)
    logger.info(f"Artifacts written to `{output_dir}`.")


def evaluate_config(config: RunConfig) -> MetricsRecord:
    """
    The default evaluator of sweeps and ablations: an in-memory run reporting the configured objective.
    """
    return run_pipeline(config, write_artifacts=False).record(config.evaluation.objective)


@dataclass(frozen=True, eq=False)
class RestoredRun:
    config: RunConfig
    graph: HeteroGraph
    split: EdgeSplit
    context: TopologyContext
    params: VgaeParams


def restore_run(checkpoint_path: Path) -> RestoredRun:
    """
    Rebuilds the graph, the split and the topology context of the run that wrote `checkpoint_path`.
    """
    checkpoint = load_checkpoint(checkpoint_path)
    config: RunConfig = inflate_config(checkpoint.config)
    graph: HeteroGraph = ingest(config)
    split: EdgeSplit = split_target(graph, config)

    return RestoredRun(
        config=config,
        graph=graph,
        split=split,
        context=build_context(graph, split, checkpoint.features),
        params=checkpoint.params,
    )


def allocation_evaluator(config: RunConfig) -> AllocationEvaluator:
    def evaluate(epsilon_f: float, epsilon_s: float, seed_index: int) -> float:
        budgeted = with_budget(
            config, epsilon_f + epsilon_s, epsilon_f=epsilon_f, epsilon_s=epsilon_s
        ).copy(update={"seed": config.seed + seed_index})
        record: MetricsRecord = evaluate_config(budgeted)

        if record.value is None:
            raise InvalidArgumentError(
                f"The objective `{record.metric}` could not be computed.", record.detail
            )

        return record.value

    return evaluate


def feasibility_check(config: RunConfig) -> FeasibilityCheck:
    """
    The accountant verdict of a budget split, judged on the training size of the configured split.
    """
    graph: HeteroGraph = ingest(config)
    train_size: int = split_target(graph, config).train.shape[0]

    def feasible(epsilon_f: float, epsilon_s: float) -> bool:
        if not config.privacy.perturb_topology:
            return True

        budgeted = with_budget(config, epsilon_f + epsilon_s, epsilon_f=epsilon_f, epsilon_s=epsilon_s)
        resolved, _, _ = resolve_topology_privacy(
            budgeted.privacy, train_size=train_size, batch_size=config.topology.batch_size
        )
        verdict, _ = accountant_feasible(resolved)
        return verdict

    return feasible


# # Runs — END
