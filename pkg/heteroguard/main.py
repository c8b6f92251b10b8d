"""
HeteroGuard — Entrypoint for the differentially private heterogeneous graph learning pipeline.
Every subcommand shares one flow: parse the arguments, configure logging, resolve the run configuration, then hand it over to the handler registered for the subcommand.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""
import logging
from argparse import Namespace
from logging.config import dictConfig
from typing import Any, Sequence

from pydantic import ValidationError

from blueprint.schemas import RunConfig
from core.args import args_handler as ArgsHandler
from core.args import config_overrides
from core.constants import LOGGER_NAME, ExitCode, LoggerLevelCoverage, Subcommand
from core.decorators import command_handlers
from core.dependencies import store_args_value, store_run_config
from core.pipeline import load_run_config
from utils.exceptions import HeteroGuardError
from utils.logger import LoggerHandler

"""
# # Subcommand Handlers
- Imported for their side effect only: each module registers its handlers through `register_command`.
"""
import commands.dataset  # noqa: F401, E402
import commands.experiment  # noqa: F401, E402

logger: logging.Logger = logging.getLogger(LOGGER_NAME)


def main(argv: Sequence[str] | None = None) -> int:
    parsed_args: Namespace = ArgsHandler.parse_args(argv)

    # * Resolve the literal level name to its Enum object.
    parsed_args.log_level = LoggerLevelCoverage[parsed_args.log_level]
    store_args_value(parsed_args)

    logger_config: dict[str, Any] = LoggerHandler.init(
        disable_file_logging=parsed_args.no_log_file,
        logger_level=parsed_args.log_level,
    )
    dictConfig(logger_config)

    try:
        config: RunConfig = load_run_config(parsed_args.config, config_overrides(parsed_args))

    except ValidationError as e:
        logger.critical(f"The run configuration was refused: {e}")
        return ExitCode.CONFIGURATION_ERROR.value

    except HeteroGuardError as e:
        return e.exit_code.value

    store_run_config(config)
    subcommand: Subcommand = Subcommand(parsed_args.subcommand)
    logger.info(f"Running `{subcommand.value}` with seed {config.seed} and epsilon {config.privacy.budget}.")

    try:
        return command_handlers[subcommand](parsed_args, config).value

    # ! Errors were logged where they were raised, only the exit code is left to resolve.
    except HeteroGuardError as e:
        return e.exit_code.value

    except ValidationError as e:
        logger.critical(f"A derived configuration was refused: {e}")
        return ExitCode.CONFIGURATION_ERROR.value


if __name__ == "__main__":
    raise SystemExit(main())
