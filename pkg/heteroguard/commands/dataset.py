"""
Dataset Commands (dataset.py) | The `prepare` subcommand: ingest, validate and split a dataset directory.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from argparse import Namespace
from logging import Logger, getLogger
from pathlib import Path

from blueprint.schemas import RunConfig, ValidationReport
from core.constants import (
    CONFIG_ECHO_FILE_NAME,
    LOGGER_NAME,
    SYNTHETIC_DATASET_SEED,
    VALIDATION_REPORT_FILE_NAME,
    ExitCode,
    Subcommand,
)
from core.decorators import register_command
from core.graph import validate, write_split
from core.pipeline import echo_run_config, ingest, resolve_output_dir, split_target
from core.synthetic import generate_synthetic_dataset
from utils.exceptions import ConfigurationError, GraphValidationError
from utils.processors import write_json

logger: Logger = getLogger(LOGGER_NAME)


@register_command(name=Subcommand.PREPARE)
def prepare_dataset(args: Namespace, config: RunConfig) -> ExitCode:
    """
    Writes the validation report and the split of the target relation. With `--synthetic` the bundled graph is generated into the dataset directory first.
    """
    dataset_path: Path | None = config.dataset.path

    if dataset_path is None:
        raise ConfigurationError("`prepare` needs a dataset directory, pass `--dataset`.")

    if config.dataset.synthetic:
        generate_synthetic_dataset(dataset_path, SYNTHETIC_DATASET_SEED)

    output_dir: Path = resolve_output_dir(config, Subcommand.PREPARE.value)
    echo_run_config(config, output_dir / CONFIG_ECHO_FILE_NAME)

    try:
        graph = ingest(config)
    except GraphValidationError as e:
        write_json(
            output_dir / VALIDATION_REPORT_FILE_NAME,
            ValidationReport(node_counts={}, edge_counts={}, violations=e.violations),
        )
        raise

    report: ValidationReport = validate(graph)
    write_json(output_dir / VALIDATION_REPORT_FILE_NAME, report)

    split_path: Path = write_split(split_target(graph, config), graph, output_dir)
    logger.info(
        f"Prepared `{dataset_path}` with {len(report.violations)} violation(s), split written to `{split_path}`."
    )
    return ExitCode.SUCCESS
