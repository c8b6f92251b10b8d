"""
Budget Allocator (allocator.py) | Splits a global privacy budget between node features and topology by a coordinate-wise grid search.

The first pass keeps the topology share at half of the budget as the reference and sweeps the feature fraction over the grid, always including the equal split. The second pass refines the topology share around the best fraction by evaluating midpoints with its neighbouring fractions. Every evaluated pair conserves the budget exactly through `core.privacy.split_budget`.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from logging import Logger, getLogger
from math import isfinite
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from blueprint.schemas import (
    AllocationComparison,
    AllocationPlan,
    AllocationRow,
    AllocationSeriesPoint,
)
from core.constants import (
    ALLOCATION_FILE_NAME,
    ALLOCATION_SERIES_FILE_NAME,
    ALLOCATION_TIE_TOLERANCE,
    LOGGER_NAME,
    AllocationPhase,
    ObjectiveMetric,
    RunStatus,
)
from core.privacy import split_budget
from utils.exceptions import (
    AllocationAborted,
    HeteroGuardError,
    InvalidArgumentError,
    PrivacyBudgetExceeded,
)
from utils.processors import write_json, write_tsv

logger: Logger = getLogger(LOGGER_NAME)

AllocationEvaluator = Callable[[float, float, int], float]  # * (epsilon_f, epsilon_s, seed index) -> objective
FeasibilityCheck = Callable[[float, float], bool]

EQUAL_SPLIT: float = 0.5


class _GridSearch:
    def __init__(
        self,
        plan: AllocationPlan,
        evaluator: AllocationEvaluator,
        feasible: FeasibilityCheck | None,
    ) -> None:
        self.plan: AllocationPlan = plan
        self.evaluator: AllocationEvaluator = evaluator
        self.feasible: FeasibilityCheck | None = feasible
        self.means: dict[float, float | None] = {}

    def evaluate(self, fraction: float, phase: AllocationPhase) -> float | None:
        if fraction in self.means:
            return self.means[fraction]

        epsilon_f, epsilon_s = split_budget(self.plan.epsilon, fraction)
        rows: list[AllocationRow] = []

        if self.feasible is not None and not self.feasible(epsilon_f, epsilon_s):
            logger.warning(
                f"Fraction {fraction} (epsilon_f = {epsilon_f}, epsilon_s = {epsilon_s}) fails the accountant, skipped."
            )
            rows = [
                AllocationRow(
                    phase=phase,
                    fraction=fraction,
                    epsilon_f=epsilon_f,
                    epsilon_s=epsilon_s,
                    seed=seed,
                    objective=None,
                    status=RunStatus.INFEASIBLE,
                )
                for seed in range(self.plan.seeds)
            ]
            self.plan.table.extend(rows)
            self.means[fraction] = None
            return None

        for seed in range(self.plan.seeds):
            objective: float | None

            try:
                objective, status = float(self.evaluator(epsilon_f, epsilon_s, seed)), RunStatus.OK
            except PrivacyBudgetExceeded:
                objective, status = None, RunStatus.INFEASIBLE
            except HeteroGuardError as e:
                self.plan.table.append(
                    AllocationRow(
                        phase=phase,
                        fraction=fraction,
                        epsilon_f=epsilon_f,
                        epsilon_s=epsilon_s,
                        seed=seed,
                        objective=None,
                        status=RunStatus.FAILED,
                    )
                )
                raise AllocationAborted(
                    f"The evaluation of fraction {fraction} with seed {seed} failed.",
                    partial_plan=self.plan,
                ) from e

            rows.append(
                AllocationRow(
                    phase=phase,
                    fraction=fraction,
                    epsilon_f=epsilon_f,
                    epsilon_s=epsilon_s,
                    seed=seed,
                    objective=objective,
                    status=status,
                )
            )

        self.plan.table.extend(rows)
        scores = [each.objective for each in rows if each.objective is not None]
        mean: float | None = float(np.mean(scores)) if len(scores) == len(rows) else None
        self.means[fraction] = mean

        logger.info(f"Fraction {fraction}: mean {self.plan.objective_name} = {mean}.")
        return mean

    def best(self) -> float | None:
        scored: list[tuple[float, float]] = [
            (fraction, mean) for fraction, mean in self.means.items() if mean is not None
        ]

        if not scored:
            return None

        top: float = max(mean for _, mean in scored)

        # * Ties go to the smallest feature fraction, the largest topology share.
        return min(
            fraction for fraction, mean in scored if top - mean <= ALLOCATION_TIE_TOLERANCE
        )


def allocate(
    epsilon: float,
    grid: Sequence[float],
    evaluator: AllocationEvaluator,
    seeds: int,
    *,
    refinement_depth: int = 1,
    objective: ObjectiveMetric = ObjectiveMetric.VALIDATION_AUC,
    feasible: FeasibilityCheck | None = None,
) -> AllocationPlan:
    """
    Searches the feature fraction of `epsilon` that maximises the mean objective over `seeds` evaluations.

    Raises:
        InvalidArgumentError: On an empty grid, a fraction outside (0, 1), a non-positive budget or no seeds.
        AllocationAborted: When an evaluation fails. The partial plan is attached to the error.
    """
    if not grid:
        raise InvalidArgumentError("The allocation grid is empty.")

    if not (isfinite(epsilon) and epsilon > 0.0):
        raise InvalidArgumentError(f"The budget to allocate must be positive and finite, got {epsilon}.")

    if seeds < 1:
        raise InvalidArgumentError(f"At least one seed is needed per grid point, got {seeds}.")

    outside: list[float] = [each for each in grid if not 0.0 < each < 1.0]

    if outside:
        raise InvalidArgumentError(f"Grid fractions must lie in (0, 1), got {outside}.")

    plan = AllocationPlan(
        epsilon=epsilon,
        grid=sorted(set(float(each) for each in grid)),
        seeds=seeds,
        objective_name=objective.value,
    )
    search = _GridSearch(plan, evaluator, feasible)

    # - Inner pass, over the feature share.
    for each_fraction in plan.grid:
        search.evaluate(each_fraction, AllocationPhase.INNER)

    if EQUAL_SPLIT not in search.means:
        search.evaluate(EQUAL_SPLIT, AllocationPhase.BASELINE)

    # - Outer pass, refining the topology share around the best fraction.
    for _ in range(refinement_depth):
        centre: float | None = search.best()

        if centre is None:
            break

        evaluated: list[float] = sorted(search.means)
        position: int = evaluated.index(centre)
        neighbours: list[float] = [
            evaluated[each] for each in (position - 1, position + 1) if 0 <= each < len(evaluated)
        ]

        for each_neighbour in neighbours:
            midpoint: float = (centre + each_neighbour) / 2.0

            if 0.0 < midpoint < 1.0:
                search.evaluate(midpoint, AllocationPhase.OUTER)

    chosen: float | None = search.best()

    if chosen is None:
        logger.warning("Every grid point was infeasible, nothing was chosen.")
        plan.complete = True
        return plan

    plan.chosen_fraction = chosen
    plan.chosen_epsilon_f, plan.chosen_epsilon_s = split_budget(epsilon, chosen)
    plan.complete = True

    logger.info(
        f"Chose epsilon_f = {plan.chosen_epsilon_f}, epsilon_s = {plan.chosen_epsilon_s} (fraction {chosen})."
    )
    return plan


def report_allocation(plan: AllocationPlan) -> AllocationComparison:
    """
    The equal split against the chosen split, and the mean objective per evaluated fraction in ascending order.
    """
    if not plan.complete or plan.chosen_fraction is None:
        raise InvalidArgumentError("Only a complete plan with a chosen split can be reported.")

    grouped: dict[float, list] = {}

    for each_row in plan.table:
        grouped.setdefault(each_row.fraction, []).append(each_row)

    series: list[AllocationSeriesPoint] = []

    for each_fraction in sorted(grouped):
        rows = grouped[each_fraction]
        scores = np.array([each.objective for each in rows if each.objective is not None])
        series.append(
            AllocationSeriesPoint(
                fraction=each_fraction,
                epsilon_f=rows[0].epsilon_f,
                epsilon_s=rows[0].epsilon_s,
                mean=float(scores.mean()) if scores.size else None,
                std=float(scores.std()) if scores.size else None,
                count=int(scores.size),
            )
        )

    by_fraction: dict[float, AllocationSeriesPoint] = {each.fraction: each for each in series}
    equal = by_fraction.get(EQUAL_SPLIT)

    return AllocationComparison(
        epsilon=plan.epsilon,
        equal_split=equal.mean if equal else None,
        optimized=by_fraction[plan.chosen_fraction].mean,
        chosen_fraction=plan.chosen_fraction,
        series=series,
    )


def write_allocation(plan: AllocationPlan, directory: Path) -> AllocationComparison | None:
    comparison: AllocationComparison | None = (
        report_allocation(plan) if plan.chosen_fraction is not None else None
    )
    write_json(
        directory / ALLOCATION_FILE_NAME,
        {
            "plan": plan.dict(),
            "comparison": comparison.dict() if comparison else None,
        },
    )

    if comparison is not None:
        write_tsv(
            directory / ALLOCATION_SERIES_FILE_NAME,
            [
                [each.fraction, each.epsilon_f, each.epsilon_s, each.mean, each.std, each.count]
                for each in comparison.series
            ],
            columns=["fraction", "epsilon_f", "epsilon_s", "mean", "std", "count"],
        )

    return comparison
