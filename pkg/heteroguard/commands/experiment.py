"""
Experiment Commands (experiment.py) | The `train`, `evaluate`, `sweep`, `allocate` and `attack` subcommands.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from argparse import Namespace
from logging import Logger, getLogger
from pathlib import Path

from blueprint.schemas import AttackResult, MetricsRecord, RunConfig
from core.allocator import allocate, write_allocation
from core.constants import (
    ABLATION_FILE_NAME,
    ATTACK_FILE_NAME,
    CONFIG_ECHO_FILE_NAME,
    CURVE_FILE_NAME,
    LOGGER_NAME,
    METRICS_FILE_NAME,
    ExitCode,
    Subcommand,
)
from core.decorators import register_command
from core.evaluation import (
    run_ablation,
    run_epsilon_sweep,
    topology_attack,
    write_ablation_tsv,
    write_curve_tsv,
    write_metrics_jsonl,
)
from core.graph import HeteroGraph, load_dataset, rewire_relation
from core.pipeline import (
    RestoredRun,
    allocation_evaluator,
    echo_run_config,
    evaluate_config,
    feasibility_check,
    metrics_records,
    reported_metrics,
    resolve_output_dir,
    restore_run,
    run_pipeline,
    score_run,
)
from core.vgae import reconstruct_relation
from utils.exceptions import AllocationAborted, ConfigurationError
from utils.processors import write_json

logger: Logger = getLogger(LOGGER_NAME)


@register_command(name=Subcommand.TRAIN)
def train_pipeline(args: Namespace, config: RunConfig) -> ExitCode:
    result = run_pipeline(config, label=Subcommand.TRAIN.value)

    for each in result.records:
        logger.info(f"{each.metric} = {each.value}")

    return ExitCode.SUCCESS


@register_command(name=Subcommand.EVALUATE)
def evaluate_checkpoint(args: Namespace, config: RunConfig) -> ExitCode:
    """
    Scores a checkpoint on the split it was trained with. The run configuration is taken from the checkpoint, only the output directory comes from the flags.
    """
    restored: RestoredRun = restore_run(args.checkpoint)
    output_dir: Path = resolve_output_dir(
        restored.config.copy(update={"out_dir": config.out_dir}), Subcommand.EVALUATE.value
    )
    scores = score_run(
        restored.graph,
        restored.split,
        restored.context,
        restored.params,
        restored.config,
        reported_metrics(restored.config),
    )
    records: list[MetricsRecord] = metrics_records(restored.config, scores, 0.0)
    write_metrics_jsonl(output_dir / METRICS_FILE_NAME, records)

    for each in records:
        logger.info(f"{each.metric} = {each.value}")

    return ExitCode.SUCCESS


@register_command(name=Subcommand.SWEEP)
def sweep_budgets(args: Namespace, config: RunConfig) -> ExitCode:
    output_dir: Path = resolve_output_dir(config, Subcommand.SWEEP.value)
    echo_run_config(config, output_dir / CONFIG_ECHO_FILE_NAME)

    records = run_epsilon_sweep(
        config,
        config.evaluation.sweep_epsilons,
        config.evaluation.sweep_seeds,
        evaluate_config,
    )
    write_metrics_jsonl(output_dir / METRICS_FILE_NAME, records)
    write_curve_tsv(output_dir / CURVE_FILE_NAME, records)

    if args.ablation:
        series = run_ablation(config, evaluate_config)
        write_ablation_tsv(output_dir / ABLATION_FILE_NAME, series)

    return ExitCode.SUCCESS


@register_command(name=Subcommand.ALLOCATE)
def allocate_budget(args: Namespace, config: RunConfig) -> ExitCode:
    output_dir: Path = resolve_output_dir(config, Subcommand.ALLOCATE.value)
    echo_run_config(config, output_dir / CONFIG_ECHO_FILE_NAME)

    try:
        plan = allocate(
            config.privacy.budget,
            config.evaluation.allocation_grid,
            allocation_evaluator(config),
            config.evaluation.allocation_seeds,
            refinement_depth=config.evaluation.refinement_depth,
            objective=config.evaluation.objective,
            feasible=feasibility_check(config),
        )
    except AllocationAborted as e:
        if e.partial_plan is not None:
            write_allocation(e.partial_plan, output_dir)
            logger.error(f"Allocation aborted, the partial plan is in `{output_dir}`.")
        raise

    comparison = write_allocation(plan, output_dir)

    if comparison is not None:
        logger.info(
            f"Equal split {comparison.equal_split}, optimised {comparison.optimized} at fraction {comparison.chosen_fraction}."
        )

    return ExitCode.SUCCESS


@register_command(name=Subcommand.ATTACK)
def attack_release(args: Namespace, config: RunConfig) -> ExitCode:
    """
    Attacks either a released dataset directory or the relation reconstructed from a checkpoint.
    """
    auxiliary: HeteroGraph = load_dataset(args.auxiliary)

    if args.checkpoint is not None:
        restored: RestoredRun = restore_run(args.checkpoint)
        target: HeteroGraph = restored.graph.with_edges(
            restored.split.relation,
            reconstruct_relation(restored.graph, restored.context, restored.params),
        )
    else:
        target = load_dataset(args.target)

    swaps: int = config.evaluation.attack_rewire_swaps

    if swaps:
        relation = target.schema.target_relation

        if relation is None:
            raise ConfigurationError("Rewiring the attacked graph needs a target relation in its schema.")

        target = rewire_relation(target, relation, swaps, config.seed)
        logger.info(f"Attacking `{relation}` after {swaps} degree-preserving swap(s).")

    result: AttackResult = topology_attack(
        auxiliary,
        target,
        signature=config.evaluation.attack_signature,
        seed=config.seed,
    )
    output_dir: Path = resolve_output_dir(config, Subcommand.ATTACK.value)
    write_json(output_dir / ATTACK_FILE_NAME, result)

    return ExitCode.SUCCESS
