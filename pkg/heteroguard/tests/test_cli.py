from pathlib import Path

import orjson
import pytest

from core.constants import (
    ALLOCATION_FILE_NAME,
    ATTACK_FILE_NAME,
    CHECKPOINT_FILE_NAME,
    CONFIG_ECHO_FILE_NAME,
    METRICS_FILE_NAME,
    SYNTHETIC_DATASET_SEED,
    VALIDATION_REPORT_FILE_NAME,
    ExitCode,
)
from blueprint.schemas import RunConfig
from core.synthetic import generate_synthetic_dataset
from main import main
from utils.exceptions import NumericDivergenceError


def _run(*argv: str) -> int:
    return main([*argv, "--no-log-file"])


def test_prepare_writes_the_report_and_the_split(tmp_path: Path) -> None:
    out = tmp_path / "out"
    code = _run("prepare", "--synthetic", "--dataset", str(tmp_path / "ds"), "--out", str(out))

    assert code == ExitCode.SUCCESS
    assert (out / CONFIG_ECHO_FILE_NAME).is_file()
    assert len(list(out.glob("split_*_0.tsv"))) == 1

    report = orjson.loads((out / VALIDATION_REPORT_FILE_NAME).read_bytes())
    assert report["violations"] == []
    assert report["node_counts"] == {"paper": 120, "author": 150, "field": 30}


def test_prepare_needs_a_dataset_directory(tmp_path: Path) -> None:
    assert _run("prepare", "--out", str(tmp_path)) == ExitCode.CONFIGURATION_ERROR


def test_missing_configuration_file(tmp_path: Path) -> None:
    assert _run("train", "--config", str(tmp_path / "absent.cfg")) == ExitCode.CONFIGURATION_ERROR


def test_inconsistent_budget_flags(tmp_path: Path) -> None:
    code = _run("train", "-e", "1.0", "-ef", "0.3", "-es", "0.3", "--out", str(tmp_path))

    assert code == ExitCode.CONFIGURATION_ERROR


def test_missing_checkpoint(tmp_path: Path) -> None:
    code = _run("evaluate", "--checkpoint", str(tmp_path / "absent.pt"), "--out", str(tmp_path))

    assert code == ExitCode.CONFIGURATION_ERROR


def test_attack_on_a_released_directory(tmp_path: Path) -> None:
    dataset = tmp_path / "ds"
    generate_synthetic_dataset(dataset, SYNTHETIC_DATASET_SEED)
    out = tmp_path / "out"

    code = _run("attack", "--auxiliary", str(dataset), "--target", str(dataset), "--out", str(out))
    result = orjson.loads((out / ATTACK_FILE_NAME).read_bytes())

    assert code == ExitCode.SUCCESS
    assert result["matched_count"] == result["unique_count"]
    assert result["correct_count"] == result["unique_count"]


def test_attack_on_a_rewired_release(tmp_path: Path) -> None:
    dataset = tmp_path / "ds"
    generate_synthetic_dataset(dataset, SYNTHETIC_DATASET_SEED)
    config = tmp_path / "rewire.cfg"
    config.write_text("evaluation.attack_rewire_swaps = 200\n", encoding="utf-8")
    out = tmp_path / "out"

    code = _run(
        "attack",
        "--config",
        str(config),
        "--auxiliary",
        str(dataset),
        "--target",
        str(dataset),
        "--out",
        str(out),
    )
    result = orjson.loads((out / ATTACK_FILE_NAME).read_bytes())

    assert code == ExitCode.SUCCESS
    assert result["correct_count"] <= result["matched_count"] <= result["unique_count"]


def test_attack_target_sources_are_exclusive(tmp_path: Path) -> None:
    with pytest.raises(SystemExit):
        _run("attack", "--auxiliary", "a", "--target", "b", "--checkpoint", "c")


@pytest.mark.slow
def test_train_then_evaluate(fast_config_file: Path, tmp_path: Path) -> None:
    run_dir, evaluation_dir = tmp_path / "run", tmp_path / "evaluation"

    assert _run("train", "--config", str(fast_config_file), "--out", str(run_dir)) == ExitCode.SUCCESS
    assert (run_dir / CHECKPOINT_FILE_NAME).is_file()
    assert (run_dir / METRICS_FILE_NAME).is_file()

    code = _run(
        "evaluate",
        "--checkpoint",
        str(run_dir / CHECKPOINT_FILE_NAME),
        "--out",
        str(evaluation_dir),
    )

    assert code == ExitCode.SUCCESS
    assert (evaluation_dir / METRICS_FILE_NAME).is_file()


@pytest.mark.slow
def test_accountant_refusal_exits_with_the_budget_code(fast_config_file: Path, tmp_path: Path) -> None:
    with fast_config_file.open("a", encoding="utf-8") as config:
        config.write("privacy.noise_multiplier = 0.01\n")

    code = _run("train", "--config", str(fast_config_file), "--out", str(tmp_path / "run"))

    assert code == ExitCode.PRIVACY_BUDGET_ABORT


def test_aborted_allocation_writes_the_partial_plan(
    fast_config_file: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    def failing_evaluator(config: RunConfig):
        def evaluate(epsilon_f: float, epsilon_s: float, seed_index: int) -> float:
            raise NumericDivergenceError("The evaluation diverged.")

        return evaluate

    monkeypatch.setattr("commands.experiment.allocation_evaluator", failing_evaluator)
    out = tmp_path / "out"

    code = _run("allocate", "--config", str(fast_config_file), "--out", str(out))
    written = orjson.loads((out / ALLOCATION_FILE_NAME).read_bytes())

    assert code == ExitCode.RUNTIME_ERROR
    assert written["comparison"] is None
    assert written["plan"]["chosen_fraction"] is None
    assert written["plan"]["table"][-1]["status"] == "failed"
