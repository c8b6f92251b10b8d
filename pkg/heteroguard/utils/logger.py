"""
Custom Logger (logger.py) — Builds the logging configuration used by every subcommand so that the console and the log file share one format.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

if __name__ == "__main__":
    raise SystemExit(
        f"This {__file__} is not designed for main / entrypoint purposes! It only provides logging properties to the entrypoint code."
    )

from datetime import datetime
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from core.constants import LOGGER_NAME, LoggerLevelCoverage


class CustomInjectLoggerConfig(BaseModel):
    DEFAULT_LOG_FORMAT: str = "%(levelname)-8s %(module)s:%(lineno)d (%(funcName)s) | %(asctime)s | %(message)s"
    LOG_DATE_FORMAT: str = "%H:%M:%S, %m-%d-%Y"
    LOG_DATE_FORMAT_IN_FILE: str = "%H%M%S_%m%d%Y"


class LoggerHandler:
    @classmethod
    def init(
        cls,
        *,
        log_folder: Path | None = None,
        disable_file_logging: bool = False,
        logger_level: LoggerLevelCoverage = LoggerLevelCoverage.INFO,
    ) -> dict[str, Any]:
        """
        Returns a `logging.config.dictConfig` compatible dictionary with a console handler and, unless disabled, a file handler under `logs/`.

        Args:
            log_folder (Path | None, optional): Where the log file goes. Defaults to `<cwd>/logs`.
            disable_file_logging (bool, optional): Disables logging to the file. Defaults to False.
            logger_level (LoggerLevelCoverage, optional): The level of the package logger. Defaults to INFO.

        Returns:
            dict[str, Any]: The configuration, to be passed to `dictConfig`.
        """

        _custom_config = CustomInjectLoggerConfig().dict()

        base_config: dict[str, Any] = {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "default": {
                    "format": _custom_config["DEFAULT_LOG_FORMAT"],
                    "datefmt": _custom_config["LOG_DATE_FORMAT"],
                }
            },
            "handlers": {
                "console": {
                    "class": "logging.StreamHandler",
                    "formatter": "default",
                    "stream": "ext://sys.stderr",
                }
            },
            "loggers": {
                LOGGER_NAME: {
                    "handlers": ["console"],
                    "level": logger_level.value,
                    "propagate": False,
                }
            },
        }

        if not disable_file_logging:
            _folder_handle = log_folder or Path(f"{Path.cwd()}/logs")

            if not _folder_handle.exists():
                _folder_handle.mkdir(parents=True, exist_ok=True)

            # * Create a general file handler, sharing the same formatter.
            base_config["handlers"]["file_logger"] = {
                "class": "logging.FileHandler",
                "filename": f"{_folder_handle}/run_{datetime.now().strftime(_custom_config['LOG_DATE_FORMAT_IN_FILE'])}.log",
                "formatter": "default",
                "encoding": "utf-8",
            }
            base_config["loggers"][LOGGER_NAME]["handlers"].append("file_logger")

        return base_config
