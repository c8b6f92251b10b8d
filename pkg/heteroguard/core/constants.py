"""
Literal Constants (constants.py) | A set of variables for references for the components that needs it.

Every default that the experiments rely on (feature learning and topology learning settings, privacy parameters, split ratios) is declared here so that the configuration layer, the argument handler and the tests all point at a single source.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from enum import Enum, IntEnum
from typing import Final
from typing import NewType as _N

import numpy as np
import numpy.typing as npt

# # Custom Assertable Types
ArgumentDescription = _N("ArgumentDescription", str)
ArgumentParameter = _N("ArgumentParameter", str)
MetaPathName = _N("MetaPathName", str)
NodeId = _N("NodeId", str)
NodeTypeName = _N("NodeTypeName", str)
ProgramMetadata = _N("ProgramMetadata", str)
RegExp = _N("RegExp", str)
RelationName = _N("RelationName", str)

# # Custom Variable Types
EdgeArray = npt.NDArray[np.int64]  # * Shape (E, 2), local row indices of (source, target).
FloatMatrix = npt.NDArray[np.float64]
FloatVector = npt.NDArray[np.float64]
NodeKey = tuple[NodeTypeName, NodeId]
SplitRatios = tuple[float, float, float]

# # Constants, General
LOGGER_NAME: Final[str] = "heteroguard"
ENUM_NAME_PATTERN: RegExp = RegExp(r"[A-Z]")
SCHEMA_VERSION: Final[int] = 1
OUTPUT_ROOT_ENV: Final[str] = "HETEROGUARD_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT: Final[str] = "runs"
SIMPLEX_TOLERANCE: Final[float] = 1e-9

# # Constants, Dataset Layout
SCHEMA_FILE_NAME: Final[str] = "schema.cfg"
NODES_FILE_TEMPLATE: Final[str] = "nodes_{node_type}.tsv"
EDGES_FILE_TEMPLATE: Final[str] = "edges_{relation}.tsv"
LABELS_FILE_TEMPLATE: Final[str] = "labels_{node_type}.tsv"
SPLIT_FILE_TEMPLATE: Final[str] = "split_{relation}_{seed}.tsv"
TSV_COMMENT_CHAR: Final[str] = "#"
TSV_DELIMITER: Final[str] = "\t"

# # Constants, Artifacts
CONFIG_ECHO_FILE_NAME: Final[str] = "config.echo.cfg"
CHECKPOINT_FILE_NAME: Final[str] = "checkpoint.pt"
EMBEDDINGS_FILE_NAME: Final[str] = "embeddings.tsv"
ATTENTION_REPORT_FILE_NAME: Final[str] = "attention_report.json"
TRAIN_REPORT_FILE_NAME: Final[str] = "train_report.jsonl"
METRICS_FILE_NAME: Final[str] = "metrics.jsonl"
VALIDATION_REPORT_FILE_NAME: Final[str] = "validation_report.json"
CURVE_FILE_NAME: Final[str] = "epsilon_curve.tsv"
ABLATION_FILE_NAME: Final[str] = "ablation.tsv"
ALLOCATION_FILE_NAME: Final[str] = "allocation.json"
ALLOCATION_SERIES_FILE_NAME: Final[str] = "allocation_series.tsv"
ATTACK_FILE_NAME: Final[str] = "attack.json"

# # Constants, Graph Splits
DEFAULT_SPLIT_RATIOS: Final[SplitRatios] = (0.85, 0.05, 0.10)

# # Constants, Feature Learning (first stage)
DEFAULT_ENCODER_HEADS: Final[int] = 8
DEFAULT_ENCODER_HIDDEN: Final[int] = 64
DEFAULT_ENCODER_LAYERS: Final[int] = 1
DEFAULT_ENCODER_DROPOUT: Final[float] = 0.8
DEFAULT_ENCODER_WEIGHT_DECAY: Final[float] = 1e-3
DEFAULT_ENCODER_LEARNING_RATE: Final[float] = 5e-3
DEFAULT_ENCODER_EPOCHS: Final[int] = 100
DEFAULT_ENCODER_NEGATIVES: Final[int] = 1
LEAKY_RELU_SLOPE: Final[float] = 0.2

# # Constants, Topology Learning (second stage)
DEFAULT_TOPOLOGY_HIDDEN: Final[int] = 32
DEFAULT_TOPOLOGY_LATENT: Final[int] = 16
DEFAULT_TOPOLOGY_LEARNING_RATE: Final[float] = 1e-3
DEFAULT_TOPOLOGY_EPOCHS: Final[int] = 100
DEFAULT_BATCH_SIZE: Final[int] = 2048
DEFAULT_NEGATIVE_SAMPLES: Final[int] = 5
DEFAULT_KL_WEIGHT: Final[float] = 1.0
NEGATIVE_SAMPLING_MAX_ROUNDS: Final[int] = 64

# # Constants, Differential Privacy
DEFAULT_EPSILON: Final[float] = 1.0
DEFAULT_FEATURE_FRACTION: Final[float] = 0.5
DEFAULT_DELTA: Final[float] = 1e-5
DEFAULT_NOISE_SCALE: Final[float] = 0.01  # * The λ that scales feature noise.
DEFAULT_CLIP_BOUND: Final[float] = 1.0
DEFAULT_EMBEDDING_CLIP: Final[float] = 1.0
DEFAULT_ACCOUNTANT_CONSTANT: Final[float] = 1.0
GAUSSIAN_CALIBRATION_CONSTANT: Final[float] = 1.25
BUDGET_NUDGE_LIMIT: Final[int] = 8

# # Constants, Privacy Audit
DEFAULT_AUDIT_BINS: Final[int] = 100
DEFAULT_AUDIT_MIN_BIN_COUNT: Final[int] = 30

# # Constants, Evaluation
DEFAULT_SWEEP_EPSILONS: Final[tuple[float, ...]] = (0.01, 0.1, 1.0)
DEFAULT_SWEEP_SEEDS: Final[int] = 5
DEFAULT_ABLATION_EPSILON: Final[float] = 0.01
DEFAULT_NC_TRAIN_FRACTION: Final[float] = 0.8
EXACT_CYCLE_EDGE_LIMIT: Final[int] = 10_000
APPROXIMATE_CYCLE_SAMPLE: Final[int] = 512

# # Constants, Budget Allocation
DEFAULT_ALLOCATION_GRID: Final[tuple[float, ...]] = (0.1, 0.25, 0.5, 0.75, 0.9)
DEFAULT_ALLOCATION_SEEDS: Final[int] = 3
DEFAULT_REFINEMENT_DEPTH: Final[int] = 1
ALLOCATION_TIE_TOLERANCE: Final[float] = 1e-12

# # Constants, Synthetic Dataset
SYNTHETIC_COMMUNITIES: Final[int] = 10
SYNTHETIC_NODE_COUNTS: Final[dict[str, int]] = {"paper": 120, "author": 150, "field": 30}
SYNTHETIC_AUTHORS_PER_PAPER: Final[int] = 4
SYNTHETIC_IN_COMMUNITY_PROBABILITY: Final[float] = 0.95
SYNTHETIC_DATASET_SEED: Final[int] = 0  # * Graphs generated in memory, without a dataset directory.


# # Enums, Process
class ExitCode(IntEnum):
    SUCCESS = 0
    CONFIGURATION_ERROR = 2
    RUNTIME_ERROR = 3
    PRIVACY_BUDGET_ABORT = 4


class LoggerLevelCoverage(Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Subcommand(Enum):
    PREPARE = "prepare"
    TRAIN = "train"
    EVALUATE = "evaluate"
    SWEEP = "sweep"
    ALLOCATE = "allocate"
    ATTACK = "attack"


class PipelineStage(Enum):
    INGEST = "ingest"
    SPLIT = "split"
    SUBGRAPHS = "semantic subgraph generation"
    FEATURE_LEARNING = "feature learning"
    FEATURE_NOISE = "feature noising"
    TOPOLOGY_LEARNING = "topology learning"
    EVALUATION = "evaluation"
    EXPORT = "artifact export"


# # Enums, Experiment Parameters
class TaskKind(Enum):
    LINK_PREDICTION = "lp"
    NODE_CLASSIFICATION = "nc"


class PrivacySwitch(Enum):
    ON = "on"
    OFF = "off"


class SplitTag(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    VAL_NEG = "val_neg"
    TEST_NEG = "test_neg"


class LossSign(Enum):
    STANDARD = "standard"  # * Minimise reconstruction + weighted KL.
    LITERAL = "literal"  # * Minimise reconstruction - weighted KL.


class SensitivityReduction(Enum):
    SUM = "sum"
    MAX = "max"


class AttackSignature(Enum):
    FULL = "full"  # * (type, degree, quadrilaterals)
    DEGREE_ONLY = "degree"


class AblationArm(Enum):
    FEATURE_ONLY = "feature_only"
    TOPOLOGY_ONLY = "topology_only"
    BOTH = "both"


class RunStatus(Enum):
    OK = "ok"
    INFEASIBLE = "infeasible"
    FAILED = "failed"


class AllocationPhase(Enum):
    INNER = "inner"  # * Sweep of the feature share.
    OUTER = "outer"  # * Refinement of the topology share.
    BASELINE = "baseline"  # * The equal split, always evaluated.


class ObjectiveMetric(Enum):
    VALIDATION_AUC = "val_auc"
    TEST_AUC = "test_auc"
    MICRO_F1 = "micro_f1"


class ViolationKind(Enum):
    DANGLING_ENDPOINT = "dangling endpoint"
    SIGNATURE_MISMATCH = "signature mismatch"
    DUPLICATE_NODE = "duplicate node"
    DUPLICATE_EDGE = "duplicate edge"
    MISSING_FEATURE_ROWS = "missing feature rows"
    UNKNOWN_RELATION = "unknown relation"


# # Program Metadata
HETEROGUARD_TITLE: Final[ProgramMetadata] = ProgramMetadata(
    "HeteroGuard - Privacy-Preserving Heterogeneous Graph Learning (main.py)"
)
HETEROGUARD_DESCRIPTION: Final[ProgramMetadata] = ProgramMetadata(
    "Learns node embeddings and reconstructs links on heterogeneous graphs under differential privacy: attention-calibrated feature noise followed by a gradient-perturbed variational graph autoencoder."
)
HETEROGUARD_EPILOG: Final[ProgramMetadata] = ProgramMetadata(
    "Exit codes: 0 success, 2 configuration error, 3 runtime or numeric error, 4 privacy-budget abort."
)
HETEROGUARD_HELP: Final[dict[ArgumentParameter, ArgumentDescription]] = {
    ArgumentParameter("CONFIG"): ArgumentDescription(
        "A flat `section.key = value` configuration file. Values given through the other flags win over the file."
    ),
    ArgumentParameter("SEED"): ArgumentDescription(
        "The root seed. Every random stream of the run is derived from it."
    ),
    ArgumentParameter("EPSILON"): ArgumentDescription(
        "The global privacy budget, split between node features and topology."
    ),
    ArgumentParameter("EPSILON_F"): ArgumentDescription(
        "The share of the budget spent on the node feature noise."
    ),
    ArgumentParameter("EPSILON_S"): ArgumentDescription(
        "The share of the budget spent on the gradient noise of topology learning."
    ),
    ArgumentParameter("PRIVACY"): ArgumentDescription(
        "Turns both privacy mechanisms on or off. `off` sets the feature noise scale and the noise multiplier to zero."
    ),
    ArgumentParameter("TASK"): ArgumentDescription(
        "The downstream task to report: link prediction (lp) or node classification (nc)."
    ),
    ArgumentParameter("OUT"): ArgumentDescription(
        f"The output directory of the run. Defaults to the value of `{OUTPUT_ROOT_ENV}` or `{DEFAULT_OUTPUT_ROOT}`."
    ),
    ArgumentParameter("LOG_LEVEL"): ArgumentDescription(
        "Specifies the level to log both console and to the file (if enabled)."
    ),
    ArgumentParameter("NO_LOG_FILE"): ArgumentDescription(
        "Disables logging to a file. This does not however, disables logging through CLI."
    ),
    ArgumentParameter("DATASET"): ArgumentDescription(
        f"A dataset directory containing `{SCHEMA_FILE_NAME}`, the node and the edge files."
    ),
    ArgumentParameter("SYNTHETIC"): ArgumentDescription(
        "Generates the bundled synthetic heterogeneous graph into the dataset directory before preparing it."
    ),
    ArgumentParameter("CHECKPOINT"): ArgumentDescription(
        "A checkpoint written by the `train` subcommand."
    ),
    ArgumentParameter("EPSILONS"): ArgumentDescription(
        "A comma-separated list of global budgets to sweep. `inf` disables both mechanisms."
    ),
    ArgumentParameter("SEEDS"): ArgumentDescription(
        "The number of seeds to evaluate per configuration."
    ),
    ArgumentParameter("GRID"): ArgumentDescription(
        "A comma-separated list of feature-budget fractions in (0, 1)."
    ),
    ArgumentParameter("AUXILIARY"): ArgumentDescription(
        "The public dataset the attacker compares against."
    ),
    ArgumentParameter("TARGET"): ArgumentDescription(
        "The released dataset under attack."
    ),
    ArgumentParameter("ABLATION"): ArgumentDescription(
        "Also runs the feature-only, topology-only and combined arms at the ablation budget."
    ),
}
