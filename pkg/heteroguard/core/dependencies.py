"""
Dependencies (dependencies.py) | Process-wide values shared between the entrypoint and the subcommand handlers: the parsed arguments, the resolved run configuration and the output root.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from argparse import Namespace
from logging import Logger, getLogger
from os import environ as env
from pathlib import Path

from dotenv import load_dotenv

from blueprint.schemas import RunConfig
from core.constants import DEFAULT_OUTPUT_ROOT, LOGGER_NAME, OUTPUT_ROOT_ENV

args_value: Namespace
run_config: RunConfig
logger: Logger = getLogger(LOGGER_NAME)


def store_args_value(args: Namespace) -> None:
    logger.debug(f"Argument values from `Argparse` has been stored. | Context: {args}")
    global args_value
    args_value = args


def get_args_values() -> Namespace:
    global args_value
    return args_value


def store_run_config(config: RunConfig) -> None:
    logger.debug(f"Run configuration has been stored. | Context: {config}")
    global run_config
    run_config = config


def get_run_config() -> RunConfig | None:
    try:
        global run_config
        return run_config
    except NameError:
        return None


def get_output_root() -> Path:
    """
    The directory that run folders are created under when `--out` is not given. A `.env` file in the working directory may set it.
    """
    load_dotenv()
    return Path(env.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))
