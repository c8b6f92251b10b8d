from pathlib import Path

import orjson
import pytest

from blueprint.schemas import AllocationPlan
from core.allocator import allocate, report_allocation, write_allocation
from core.constants import (
    ALLOCATION_FILE_NAME,
    ALLOCATION_SERIES_FILE_NAME,
    AllocationPhase,
    RunStatus,
)
from utils.exceptions import (
    AllocationAborted,
    InvalidArgumentError,
    PrivacyBudgetExceeded,
)
from utils.processors import read_tsv

TENTHS: list[float] = [round(0.1 * each, 1) for each in range(1, 10)]


def _peaked_at(share: float, epsilon: float):
    def evaluator(epsilon_f: float, epsilon_s: float, seed: int) -> float:
        return -((epsilon_f - share * epsilon) ** 2)

    return evaluator


def test_concave_objective_is_maximised_on_the_grid() -> None:
    plan = allocate(2.0, TENTHS, _peaked_at(0.3, 2.0), seeds=1)

    assert plan.complete
    assert plan.chosen_fraction == pytest.approx(0.3)
    assert plan.chosen_epsilon_f == pytest.approx(0.6)
    assert plan.chosen_epsilon_f + plan.chosen_epsilon_s == 2.0


def test_symmetric_objective_picks_the_equal_split() -> None:
    plan = allocate(1.0, TENTHS, lambda ef, es, seed: -((ef - es) ** 2), seeds=2)

    assert plan.chosen_fraction == 0.5


def test_ties_go_to_the_smallest_feature_fraction() -> None:
    plan = allocate(1.0, TENTHS, lambda ef, es, seed: 0.7, seeds=1)

    assert plan.chosen_fraction == 0.1


def test_refinement_evaluates_midpoints_around_the_best_fraction() -> None:
    plan = allocate(1.0, TENTHS, _peaked_at(0.3, 1.0), seeds=1)
    outer = sorted(each.fraction for each in plan.table if each.phase is AllocationPhase.OUTER)

    assert outer == pytest.approx([0.25, 0.35])


def test_every_row_conserves_the_budget() -> None:
    plan = allocate(1.7, [0.1, 0.33, 0.9], _peaked_at(0.4, 1.7), seeds=3)

    assert len(plan.table) >= 3 * 4
    assert all(each.epsilon_f + each.epsilon_s == 1.7 for each in plan.table)
    assert all(each.epsilon_f > 0.0 and each.epsilon_s > 0.0 for each in plan.table)


def test_equal_split_is_always_evaluated() -> None:
    plan = allocate(1.0, [0.2, 0.8], _peaked_at(0.2, 1.0), seeds=2)
    baseline = [each for each in plan.table if each.phase is AllocationPhase.BASELINE]

    assert [each.fraction for each in baseline] == [0.5, 0.5]
    assert [each.seed for each in baseline] == [0, 1]


def test_every_seed_index_is_evaluated() -> None:
    seen: list[int] = []

    def evaluator(epsilon_f: float, epsilon_s: float, seed: int) -> float:
        seen.append(seed)
        return epsilon_s

    allocate(1.0, [0.5], evaluator, seeds=3, refinement_depth=0)

    assert seen == [0, 1, 2]


def test_nothing_is_chosen_when_every_point_is_infeasible() -> None:
    plan = allocate(1.0, TENTHS, lambda ef, es, seed: 1.0, seeds=1, feasible=lambda ef, es: False)

    assert plan.complete
    assert plan.chosen_fraction is None
    assert all(each.status is RunStatus.INFEASIBLE for each in plan.table)

    with pytest.raises(InvalidArgumentError):
        report_allocation(plan)


def test_budget_exceeded_marks_the_point_infeasible() -> None:
    def evaluator(epsilon_f: float, epsilon_s: float, seed: int) -> float:
        if epsilon_s < 0.5:
            raise PrivacyBudgetExceeded("The topology share is too small.")
        return epsilon_f

    plan = allocate(1.0, TENTHS, evaluator, seeds=1)
    statuses = {each.fraction: each.status for each in plan.table}

    assert statuses[0.9] is RunStatus.INFEASIBLE
    assert statuses[0.2] is RunStatus.OK
    assert plan.chosen_fraction == 0.5


def test_failed_evaluation_aborts_with_the_partial_plan() -> None:
    def evaluator(epsilon_f: float, epsilon_s: float, seed: int) -> float:
        if epsilon_f > 0.25:
            raise InvalidArgumentError("The evaluation broke.")
        return 1.0

    with pytest.raises(AllocationAborted) as caught:
        allocate(1.0, TENTHS, evaluator, seeds=1)

    partial: AllocationPlan = caught.value.partial_plan

    assert not partial.complete
    assert partial.table[-1].status is RunStatus.FAILED
    assert partial.table[-1].fraction == 0.3
    assert [each.status for each in partial.table[:-1]] == [RunStatus.OK, RunStatus.OK]


@pytest.mark.parametrize(
    "epsilon, grid, seeds",
    [
        (1.0, [], 1),
        (1.0, [0.0, 0.5], 1),
        (1.0, [0.5, 1.0], 1),
        (0.0, [0.5], 1),
        (float("inf"), [0.5], 1),
        (1.0, [0.5], 0),
    ],
)
def test_allocation_refuses_invalid_inputs(epsilon: float, grid: list[float], seeds: int) -> None:
    with pytest.raises(InvalidArgumentError):
        allocate(epsilon, grid, lambda ef, es, seed: 0.0, seeds=seeds)


def test_incomplete_plans_are_not_reported() -> None:
    plan = AllocationPlan(epsilon=1.0, grid=[0.5], seeds=1, objective_name="val_auc")

    with pytest.raises(InvalidArgumentError):
        report_allocation(plan)


def test_report_compares_against_the_equal_split() -> None:
    comparison = report_allocation(allocate(1.0, TENTHS, _peaked_at(0.3, 1.0), seeds=2))
    fractions = [each.fraction for each in comparison.series]

    assert comparison.chosen_fraction == pytest.approx(0.3)
    assert comparison.equal_split == pytest.approx(-0.04)
    assert comparison.optimized == pytest.approx(0.0, abs=1e-12)
    assert fractions == sorted(fractions)
    assert all(each.count == 2 for each in comparison.series)


def test_allocation_files(tmp_path: Path) -> None:
    plan = allocate(1.0, [0.25, 0.5, 0.75], _peaked_at(0.75, 1.0), seeds=1)
    write_allocation(plan, tmp_path)

    written = orjson.loads((tmp_path / ALLOCATION_FILE_NAME).read_bytes())
    series = read_tsv(tmp_path / ALLOCATION_SERIES_FILE_NAME)

    assert written["plan"]["chosen_fraction"] == 0.75
    assert written["comparison"]["chosen_fraction"] == 0.75
    assert series[0] == ["fraction", "epsilon_f", "epsilon_s", "mean", "std", "count"]
    assert len(series) == 1 + len({each.fraction for each in plan.table})
