"""
Pydantic Models (schemas.py) | Run configuration, privacy parameters and every record that a run exports.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from math import isfinite
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, root_validator, validator

from core.constants import (
    DEFAULT_ABLATION_EPSILON,
    DEFAULT_ACCOUNTANT_CONSTANT,
    DEFAULT_ALLOCATION_GRID,
    DEFAULT_ALLOCATION_SEEDS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CLIP_BOUND,
    DEFAULT_DELTA,
    DEFAULT_EMBEDDING_CLIP,
    DEFAULT_ENCODER_DROPOUT,
    DEFAULT_ENCODER_EPOCHS,
    DEFAULT_ENCODER_HEADS,
    DEFAULT_ENCODER_HIDDEN,
    DEFAULT_ENCODER_LAYERS,
    DEFAULT_ENCODER_LEARNING_RATE,
    DEFAULT_ENCODER_NEGATIVES,
    DEFAULT_ENCODER_WEIGHT_DECAY,
    DEFAULT_EPSILON,
    DEFAULT_FEATURE_FRACTION,
    DEFAULT_KL_WEIGHT,
    DEFAULT_NC_TRAIN_FRACTION,
    DEFAULT_NEGATIVE_SAMPLES,
    DEFAULT_NOISE_SCALE,
    DEFAULT_REFINEMENT_DEPTH,
    DEFAULT_SPLIT_RATIOS,
    DEFAULT_SWEEP_EPSILONS,
    DEFAULT_SWEEP_SEEDS,
    DEFAULT_TOPOLOGY_EPOCHS,
    DEFAULT_TOPOLOGY_HIDDEN,
    DEFAULT_TOPOLOGY_LATENT,
    DEFAULT_TOPOLOGY_LEARNING_RATE,
    SIMPLEX_TOLERANCE,
    AblationArm,
    AllocationPhase,
    AttackSignature,
    LossSign,
    ObjectiveMetric,
    RunStatus,
    SensitivityReduction,
    TaskKind,
    ViolationKind,
)
from utils.exceptions import PrivacySpecError


def _split_listing(value: Any) -> Any:
    # * Lists in the flat configuration file are comma-separated.
    if isinstance(value, str):
        return [each.strip() for each in value.split(",") if each.strip()]
    return value


# # Privacy — START


class PrivacySpec(BaseModel):
    epsilon: float | None = Field(
        None,
        description="The global budget. Derived from the two shares when left empty, 1 when nothing is given.",
    )
    epsilon_f: float | None = Field(
        None, description="The budget of the feature noise."
    )
    epsilon_s: float | None = Field(
        None, description="The budget of the gradient noise of topology learning."
    )
    delta: float = Field(DEFAULT_DELTA, gt=0.0, lt=1.0)
    noise_scale: float = Field(
        DEFAULT_NOISE_SCALE,
        ge=0.0,
        description="The factor scaling the calibrated feature noise. The (epsilon_f, delta) guarantee is only claimed at 1.",
    )
    clip_bound: float = Field(
        DEFAULT_CLIP_BOUND, gt=0.0, description="The per-example gradient norm bound."
    )
    embedding_clip: float = Field(
        DEFAULT_EMBEDDING_CLIP,
        gt=0.0,
        description="The L2 bound on each embedding row before the feature noise.",
    )
    noise_multiplier: float | None = Field(
        None,
        ge=0.0,
        description="The gradient noise multiplier. Calibrated from the accountant inequality when left empty.",
    )
    accountant_constant: float = Field(DEFAULT_ACCOUNTANT_CONSTANT, gt=0.0)
    sampling_probability: float | None = Field(
        None,
        gt=0.0,
        le=1.0,
        description="Defaults to the batch size over the count of training edges.",
    )
    iterations: int = Field(DEFAULT_TOPOLOGY_EPOCHS, ge=0)
    allow_large_epsilon: bool = False
    sensitivity_reduction: SensitivityReduction = SensitivityReduction.SUM
    perturb_features: bool = True
    perturb_topology: bool = True

    @root_validator(skip_on_failure=True)
    def conserve_budget(cls, values: dict[str, Any]) -> dict[str, Any]:
        # - Late import, `core.privacy` depends on the models of this file.
        from core.privacy import compose, split_budget

        epsilon: float | None = values.get("epsilon")
        epsilon_f: float | None = values.get("epsilon_f")
        epsilon_s: float | None = values.get("epsilon_s")

        for label, each in (("epsilon", epsilon), ("epsilon_f", epsilon_f), ("epsilon_s", epsilon_s)):
            if each is not None and (not isfinite(each) or each <= 0.0):
                raise PrivacySpecError(
                    f"The budget `{label}` must be a positive finite number.",
                    f"Got {each}.",
                )

        if epsilon_f is not None and epsilon_s is not None:
            total: float = compose(epsilon_f, epsilon_s)

            if epsilon is not None and total != epsilon:
                raise PrivacySpecError(
                    "The budget shares do not add up to the global budget.",
                    f"{epsilon_f!r} + {epsilon_s!r} = {total!r}, expected {epsilon!r}.",
                )
            values["epsilon"] = total

        elif epsilon_f is None and epsilon_s is None:
            resolved: float = DEFAULT_EPSILON if epsilon is None else epsilon
            values["epsilon"] = resolved
            values["epsilon_f"], values["epsilon_s"] = split_budget(
                resolved, DEFAULT_FEATURE_FRACTION
            )

        elif epsilon is None:
            raise PrivacySpecError(
                "A single budget share needs the global budget it is taken from."
            )

        elif epsilon_f is not None:
            values["epsilon_f"], values["epsilon_s"] = split_budget(
                epsilon, epsilon_f=epsilon_f
            )

        else:
            values["epsilon_f"], values["epsilon_s"] = split_budget(
                epsilon, epsilon_s=epsilon_s
            )

        return values

    @property
    def budget(self) -> float:
        assert self.epsilon is not None
        return self.epsilon

    @property
    def feature_budget(self) -> float:
        assert self.epsilon_f is not None
        return self.epsilon_f

    @property
    def topology_budget(self) -> float:
        assert self.epsilon_s is not None
        return self.epsilon_s


class AccountantSnapshot(BaseModel):
    iterations_consumed: int
    records: list[tuple[float, float]] = Field(
        default_factory=list, description="(noise multiplier, sampling probability) per iteration."
    )
    verdict: bool | None = None
    max_iterations: int | None = None


class AuditHistogram(BaseModel):
    epsilon: float
    samples: int
    bin_edges: list[float]
    reference_counts: list[int]
    neighbour_counts: list[int]
    privacy_loss: list[float | None] = Field(
        ..., description="The log-ratio of the two empirical masses per bin. Empty bins carry None."
    )
    undersampled: list[bool]
    exceedance: float = Field(
        ..., description="The reference mass of the bins whose privacy loss exceeds epsilon."
    )


# # Privacy — END

# # Graph Records — START


class ValidationViolation(BaseModel):
    kind: ViolationKind
    detail: str
    node_type: str | None = None
    relation: str | None = None
    edge: tuple[str, str] | None = None

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.detail}"


class ValidationReport(BaseModel):
    node_counts: dict[str, int]
    edge_counts: dict[str, int]
    violations: list[ValidationViolation] = Field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations


class DatasetLedger(BaseModel):
    node_counts: dict[str, int]
    edge_counts: dict[str, int]
    label_counts: dict[str, int] = Field(default_factory=dict)
    seed: int


# # Graph Records — END

# # Run Configuration — START


class DatasetSection(BaseModel):
    path: Path | None = None
    synthetic: bool = False
    metapaths: list[str] | None = Field(
        None, description="Meta-path names to use. Every declared meta-path when left empty."
    )
    target_relation: str | None = None
    classify_type: str | None = None

    _split_metapaths = validator("metapaths", pre=True, allow_reuse=True)(
        _split_listing
    )


class EncoderSection(BaseModel):
    heads: int = Field(DEFAULT_ENCODER_HEADS, ge=1)
    hidden: int = Field(DEFAULT_ENCODER_HIDDEN, gt=0)
    layers: int = Field(DEFAULT_ENCODER_LAYERS, ge=1)
    dropout: float = Field(DEFAULT_ENCODER_DROPOUT, ge=0.0, lt=1.0)
    weight_decay: float = Field(DEFAULT_ENCODER_WEIGHT_DECAY, ge=0.0)
    learning_rate: float = Field(DEFAULT_ENCODER_LEARNING_RATE, gt=0.0)
    epochs: int = Field(DEFAULT_ENCODER_EPOCHS, ge=0)
    negatives: int = Field(DEFAULT_ENCODER_NEGATIVES, ge=1)

    @root_validator(skip_on_failure=True)
    def heads_divide_hidden(cls, values: dict[str, Any]) -> dict[str, Any]:
        if values["hidden"] % values["heads"]:
            raise ValueError(
                f"The hidden dimension {values['hidden']} must be divisible by the head count {values['heads']}."
            )
        return values


class TopologySection(BaseModel):
    hidden: int = Field(DEFAULT_TOPOLOGY_HIDDEN, gt=0)
    latent: int = Field(DEFAULT_TOPOLOGY_LATENT, gt=0)
    learning_rate: float = Field(DEFAULT_TOPOLOGY_LEARNING_RATE, gt=0.0)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    negatives: int = Field(DEFAULT_NEGATIVE_SAMPLES, ge=1)
    kl_weight: float = Field(DEFAULT_KL_WEIGHT, ge=0.0)
    loss_sign: LossSign = LossSign.STANDARD


class SplitSection(BaseModel):
    train: float = Field(DEFAULT_SPLIT_RATIOS[0], ge=0.0, le=1.0)
    val: float = Field(DEFAULT_SPLIT_RATIOS[1], ge=0.0, le=1.0)
    test: float = Field(DEFAULT_SPLIT_RATIOS[2], ge=0.0, le=1.0)

    @root_validator(skip_on_failure=True)
    def ratios_sum_to_one(cls, values: dict[str, Any]) -> dict[str, Any]:
        if abs(values["train"] + values["val"] + values["test"] - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError("The split ratios must sum to 1.")
        return values

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.train, self.val, self.test)


class EvaluationSection(BaseModel):
    sweep_epsilons: list[float] = Field(default_factory=lambda: list(DEFAULT_SWEEP_EPSILONS))
    sweep_seeds: int = Field(DEFAULT_SWEEP_SEEDS, ge=1)
    ablation_epsilon: float = Field(DEFAULT_ABLATION_EPSILON, gt=0.0)
    nc_train_fraction: float = Field(DEFAULT_NC_TRAIN_FRACTION, gt=0.0, lt=1.0)
    attack_signature: AttackSignature = AttackSignature.FULL
    attack_rewire_swaps: int = Field(
        0,
        ge=0,
        description="Degree-preserving swaps applied to the target relation of the attacked graph, 0 attacks it as released.",
    )
    allocation_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_ALLOCATION_GRID))
    allocation_seeds: int = Field(DEFAULT_ALLOCATION_SEEDS, ge=1)
    refinement_depth: int = Field(DEFAULT_REFINEMENT_DEPTH, ge=0)
    objective: ObjectiveMetric = ObjectiveMetric.VALIDATION_AUC

    _split_epsilons = validator("sweep_epsilons", pre=True, allow_reuse=True)(
        _split_listing
    )
    _split_grid = validator("allocation_grid", pre=True, allow_reuse=True)(
        _split_listing
    )


class RunConfig(BaseModel):
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    encoder: EncoderSection = Field(default_factory=EncoderSection)
    privacy: PrivacySpec = Field(default_factory=PrivacySpec)
    topology: TopologySection = Field(default_factory=TopologySection)
    split: SplitSection = Field(default_factory=SplitSection)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    task: TaskKind = TaskKind.LINK_PREDICTION
    out_dir: Path | None = None
    seed: int = Field(0, ge=0)


# # Run Configuration — END

# # Training and Evaluation Records — START


class TrainEpochRecord(BaseModel):
    epoch: int
    reconstruction: float
    kl: float
    total: float
    val_auc: float | None
    max_clipped_norm: float
    wall_clock: float


class TrainReport(BaseModel):
    epochs: list[TrainEpochRecord] = Field(default_factory=list)
    accountant: AccountantSnapshot
    best_epoch: int | None = None
    best_val_auc: float | None = None
    batch_size: int
    learning_rate: float
    hidden: int
    latent: int
    noise_multiplier: float
    sampling_probability: float


class MetaPathAttention(BaseModel):
    name: str
    node_type: str
    beta: float
    alpha_mean: float
    alpha_bin_edges: list[float]
    alpha_counts: list[int]


class AttentionReport(BaseModel):
    metapaths: list[MetaPathAttention]
    feature_sigma: float
    noise_scale: float
    sensitivity_reduction: SensitivityReduction


class MetricsRecord(BaseModel):
    task: TaskKind
    dataset: str
    metric: str
    value: float | None
    seed: int
    epsilon: float
    epsilon_f: float | None
    epsilon_s: float | None
    delta: float
    perturb_features: bool
    perturb_topology: bool
    arm: AblationArm | None = None
    status: RunStatus = RunStatus.OK
    runtime: float = 0.0
    detail: str | None = None


class AllocationRow(BaseModel):
    phase: AllocationPhase
    fraction: float
    epsilon_f: float
    epsilon_s: float
    seed: int
    objective: float | None
    status: RunStatus


class AllocationPlan(BaseModel):
    epsilon: float
    grid: list[float]
    seeds: int
    objective_name: str
    chosen_fraction: float | None = None
    chosen_epsilon_f: float | None = None
    chosen_epsilon_s: float | None = None
    table: list[AllocationRow] = Field(default_factory=list)
    complete: bool = False


class AllocationSeriesPoint(BaseModel):
    fraction: float
    epsilon_f: float
    epsilon_s: float
    mean: float | None
    std: float | None
    count: int


class AllocationComparison(BaseModel):
    epsilon: float
    equal_split: float | None
    optimized: float | None
    chosen_fraction: float
    series: list[AllocationSeriesPoint]


class AttackMatch(BaseModel):
    node_type: str
    auxiliary_id: str
    target_id: str
    correct: bool


class AttackResult(BaseModel):
    signature: AttackSignature
    unique_count: int
    matched_count: int
    correct_count: int
    rate: float | None = Field(
        ..., description="Correct matches over uniquely-signatured auxiliary nodes. None when no node is unique."
    )
    approximate: bool
    matches: list[AttackMatch] = Field(default_factory=list)


# # Training and Evaluation Records — END
