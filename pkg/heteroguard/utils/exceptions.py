"""
Custom Exceptions (exceptions.py) | A set of custom reference for all processes (functions) to raise at.

Each exception logs its message on construction and carries the exit code that `main.py` returns when it escapes a subcommand.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from logging import Logger, getLogger
from typing import Any, ClassVar

from core.constants import LOGGER_NAME, ExitCode, PipelineStage

logger: Logger = getLogger(LOGGER_NAME)


class HeteroGuardError(Exception):
    exit_code: ClassVar[ExitCode] = ExitCode.RUNTIME_ERROR

    def __init__(self, message: str, context: str | None = None) -> None:
        self.message: str = message + (
            f" | Additional Info: {context}" if context else ""
        )
        self.stage: PipelineStage | None = None  # * Filled by `pipeline_stage`.

        logger.critical(self.message)
        super().__init__(self.message)


# # Configuration Family — START
class ConfigurationError(HeteroGuardError):
    exit_code = ExitCode.CONFIGURATION_ERROR


class DatasetIngestionError(ConfigurationError):
    def __init__(self, filename: str, reason: str) -> None:
        self.filename: str = filename
        super().__init__(f"Unable to ingest `{filename}`: {reason}")


class GraphValidationError(ConfigurationError):
    def __init__(self, violations: list[Any]) -> None:
        self.violations: list[Any] = violations
        super().__init__(
            f"The graph has {len(violations)} violation(s).",
            "; ".join(str(each) for each in violations[:5]),
        )


class MetaPathSchemaError(ConfigurationError):
    pass


class EdgeSplitError(ConfigurationError):
    pass


class PrivacySpecError(ConfigurationError):
    pass


class PrivacyRangeError(PrivacySpecError):
    pass


class EncoderShapeError(ConfigurationError):
    def __init__(self, expected: Any, has: Any, context: str | None = None) -> None:
        super().__init__(
            f"The shape assertion is unsatisfied. Expected {expected} but got {has}.",
            context,
        )


# # Configuration Family — END

# # Runtime Family — START
class NumericDivergenceError(HeteroGuardError):
    pass


class DegenerateNeighborhoodError(HeteroGuardError):
    pass


class NegativeSamplingError(HeteroGuardError):
    pass


class DegenerateTaskError(HeteroGuardError):
    pass


class AttackSchemaError(HeteroGuardError):
    pass


class InvalidArgumentError(HeteroGuardError):
    pass


class AllocationAborted(HeteroGuardError):
    def __init__(self, message: str, partial_plan: Any = None) -> None:
        self.partial_plan: Any = partial_plan
        super().__init__(message)


# # Runtime Family — END


class PrivacyBudgetExceeded(HeteroGuardError):
    exit_code = ExitCode.PRIVACY_BUDGET_ABORT
