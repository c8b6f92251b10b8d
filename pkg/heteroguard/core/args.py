"""
Argument Handler (args.py) | for the HeteroGuard Command-Line Entrypoint (main.py)
This handler (module) helps the entrypoint code to manage the given arguments. This restricts what can be passed and what cannot. To use this, simply import it to the entrypoint code as this should not be used as a main module (See first line of code in condition.)

Flags shared by every subcommand live in a parent parser, so they may be given after the subcommand name.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

if __name__ == "__main__":
    raise SystemExit(
        f"This {__file__} is not designed for main / entrypoint purposes! Import `args_handler` from it instead."
    )

from argparse import ArgumentParser, Namespace
from pathlib import Path
from re import Pattern, compile

from core.constants import (
    ENUM_NAME_PATTERN,
    HETEROGUARD_DESCRIPTION,
    HETEROGUARD_EPILOG,
    HETEROGUARD_HELP,
    HETEROGUARD_TITLE,
    ArgumentParameter,
    LoggerLevelCoverage,
    PrivacySwitch,
    Subcommand,
    TaskKind,
)

# Before adding arguments, inject the choices of the enums from the constants.py. Names for the logger levels, values for the rest.

compiled_pattern: Pattern[str] = compile(ENUM_NAME_PATTERN)  # * Prepare the RegExpression.
injected_choices: dict[str, list[str]] = {}

for each_enum, use_name in [(LoggerLevelCoverage, True), (PrivacySwitch, False), (TaskKind, False)]:
    re_matched: list[str] = compiled_pattern.findall(each_enum.__name__)
    injected_choices["".join(re_matched).lower()] = [
        each_value.name if use_name else each_value.value for each_value in each_enum
    ]

common_handler = ArgumentParser(add_help=False)

common_handler.add_argument(
    "-c",
    "--config",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("CONFIG")],
    type=Path,
)
common_handler.add_argument(
    "-s",
    "--seed",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("SEED")],
    type=int,
)
common_handler.add_argument(
    "-e",
    "--epsilon",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("EPSILON")],
    type=float,
)
common_handler.add_argument(
    "-ef",
    "--epsilon-f",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("EPSILON_F")],
    type=float,
)
common_handler.add_argument(
    "-es",
    "--epsilon-s",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("EPSILON_S")],
    type=float,
)
common_handler.add_argument(
    "-p",
    "--privacy",
    choices=injected_choices["ps"],
    help=HETEROGUARD_HELP[ArgumentParameter("PRIVACY")],
)
common_handler.add_argument(
    "-t",
    "--task",
    choices=injected_choices["tk"],
    help=HETEROGUARD_HELP[ArgumentParameter("TASK")],
)
common_handler.add_argument(
    "-o",
    "--out",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("OUT")],
    type=Path,
)
common_handler.add_argument(
    "-d",
    "--dataset",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("DATASET")],
    type=Path,
)
common_handler.add_argument(
    "-ll",
    "--log-level",
    choices=injected_choices["llc"],
    help=HETEROGUARD_HELP[ArgumentParameter("LOG_LEVEL")],
    default=LoggerLevelCoverage.INFO.value,
)
common_handler.add_argument(
    "-nlf",
    "--no-log-file",
    action="store_true",
    help=HETEROGUARD_HELP[ArgumentParameter("NO_LOG_FILE")],
    required=False,
)

args_handler = ArgumentParser(
    prog=HETEROGUARD_TITLE,
    description=HETEROGUARD_DESCRIPTION,
    epilog=HETEROGUARD_EPILOG,
)
subcommand_handlers = args_handler.add_subparsers(dest="subcommand", required=True)

prepare_handler = subcommand_handlers.add_parser(
    Subcommand.PREPARE.value, parents=[common_handler], help="Ingest, validate and split a dataset."
)
prepare_handler.add_argument(
    "--synthetic",
    action="store_true",
    help=HETEROGUARD_HELP[ArgumentParameter("SYNTHETIC")],
)

subcommand_handlers.add_parser(
    Subcommand.TRAIN.value, parents=[common_handler], help="Run the full private pipeline."
)

evaluate_handler = subcommand_handlers.add_parser(
    Subcommand.EVALUATE.value, parents=[common_handler], help="Score a trained checkpoint."
)
evaluate_handler.add_argument(
    "--checkpoint",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("CHECKPOINT")],
    type=Path,
    required=True,
)

sweep_handler = subcommand_handlers.add_parser(
    Subcommand.SWEEP.value, parents=[common_handler], help="Sweep the global budget."
)
sweep_handler.add_argument(
    "--epsilons",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("EPSILONS")],
)
sweep_handler.add_argument(
    "--seeds",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("SEEDS")],
    type=int,
)
sweep_handler.add_argument(
    "--ablation",
    action="store_true",
    help=HETEROGUARD_HELP[ArgumentParameter("ABLATION")],
)

allocate_handler = subcommand_handlers.add_parser(
    Subcommand.ALLOCATE.value, parents=[common_handler], help="Search the budget split."
)
allocate_handler.add_argument(
    "--grid",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("GRID")],
)
allocate_handler.add_argument(
    "--seeds",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("SEEDS")],
    type=int,
)

attack_handler = subcommand_handlers.add_parser(
    Subcommand.ATTACK.value, parents=[common_handler], help="Run the structural re-identification attack."
)
attack_handler.add_argument(
    "--auxiliary",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("AUXILIARY")],
    type=Path,
    required=True,
)
attack_target = attack_handler.add_mutually_exclusive_group(required=True)
attack_target.add_argument(
    "--target",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("TARGET")],
    type=Path,
)
attack_target.add_argument(
    "--checkpoint",
    action="store",
    help=HETEROGUARD_HELP[ArgumentParameter("CHECKPOINT")],
    type=Path,
)


def config_overrides(args: Namespace) -> dict[str, str | None]:
    """
    Maps the given flags onto flat configuration keys. Flags that were not given map to None and leave the file value alone.
    """

    def as_text(value: object) -> str | None:
        return None if value is None else str(value)

    overrides: dict[str, str | None] = {
        "seed": as_text(args.seed),
        "privacy.epsilon": as_text(args.epsilon),
        "privacy.epsilon_f": as_text(args.epsilon_f),
        "privacy.epsilon_s": as_text(args.epsilon_s),
        "task": args.task,
        "out_dir": as_text(args.out),
        "dataset.path": as_text(args.dataset),
    }

    if args.privacy is not None:
        switch: str = "true" if PrivacySwitch(args.privacy) is PrivacySwitch.ON else "false"
        overrides["privacy.perturb_features"] = switch
        overrides["privacy.perturb_topology"] = switch

    if getattr(args, "synthetic", False):
        overrides["dataset.synthetic"] = "true"

    if args.subcommand == Subcommand.SWEEP.value:
        overrides["evaluation.sweep_epsilons"] = args.epsilons
        overrides["evaluation.sweep_seeds"] = as_text(args.seeds)

    if args.subcommand == Subcommand.ALLOCATE.value:
        overrides["evaluation.allocation_grid"] = args.grid
        overrides["evaluation.allocation_seeds"] = as_text(args.seeds)

    return overrides
