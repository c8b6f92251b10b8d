"""
Decorators (decorators.py) | Wrappers shared by the pipeline stages.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from argparse import Namespace
from functools import wraps
from logging import Logger, getLogger
from time import perf_counter
from typing import Any, Callable

from blueprint.schemas import RunConfig
from core.constants import LOGGER_NAME, ExitCode, PipelineStage, Subcommand
from utils.exceptions import HeteroGuardError

# - Parameterized Decorator | Adapted from https://stackoverflow.com/questions/5929107/decorators-with-parameters

logger: Logger = getLogger(LOGGER_NAME)


def pipeline_stage(*, stage: PipelineStage) -> Callable:
    """
    Tags any `HeteroGuardError` escaping the wrapped function with the stage it escaped from. The exception itself is re-raised untouched so its exit code survives.

    Args:
        stage (PipelineStage): The stage the wrapped function implements.

    Returns:
        Callable: The decorator.
    """

    def deco(fn: Callable) -> Callable:
        @wraps(fn)
        def instance(*args: Any, **kwargs: Any) -> Any:
            started: float = perf_counter()
            logger.debug(f"Stage `{stage.value}` started ({fn.__name__}).")

            try:
                result = fn(*args, **kwargs)

            except HeteroGuardError as e:
                if e.stage is None:
                    e.stage = stage
                    logger.critical(
                        f"Stage `{stage.value}` failed with {type(e).__name__}: {e.message}"
                    )
                raise

            logger.debug(f"Stage `{stage.value}` finished in {perf_counter() - started:.3f}s.")
            return result

        return instance

    return deco


CommandHandler = Callable[[Namespace, RunConfig], ExitCode]
command_handlers: dict[Subcommand, CommandHandler] = {}


def register_command(*, name: Subcommand) -> Callable:
    """
    Registers the wrapped function as the handler of the subcommand `name`. The handlers modules are imported by `main.py` for their side effect.
    """

    def deco(fn: CommandHandler) -> CommandHandler:
        if name in command_handlers:
            raise RuntimeError(f"Subcommand `{name.value}` is already handled by `{command_handlers[name].__name__}`.")

        command_handlers[name] = fn
        return fn

    return deco
