"""
Evaluation Harness (evaluation.py) | Task metrics, privacy sweeps, ablations and the structural re-identification attack.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from collections import Counter
from dataclasses import dataclass
from logging import Logger, getLogger
from math import inf, isinf
from pathlib import Path
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import f1_score
from sklearn.model_selection import train_test_split

from blueprint.schemas import (
    AttackMatch,
    AttackResult,
    MetricsRecord,
    PrivacySpec,
    RunConfig,
)
from core.constants import (
    APPROXIMATE_CYCLE_SAMPLE,
    EXACT_CYCLE_EDGE_LIMIT,
    LOGGER_NAME,
    AblationArm,
    AttackSignature,
    FloatMatrix,
    NodeKey,
    RunStatus,
)
from core.graph import HeteroGraph
from core.privacy import split_budget
from utils.exceptions import (
    AttackSchemaError,
    DegenerateTaskError,
    InvalidArgumentError,
    PrivacyBudgetExceeded,
)
from utils.processors import derive_generator, derive_seed, write_jsonl, write_tsv

logger: Logger = getLogger(LOGGER_NAME)

Evaluator = Callable[[RunConfig], MetricsRecord]

# # Task Metrics — START


def link_prediction_auc(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float:
    """
    The probability that a random positive outscores a random negative, ties counting one half. Computed from the midranks of the pooled scores.
    """
    if not len(scores_pos) or not len(scores_neg):
        raise InvalidArgumentError("Both the positive and the negative scores must be non-empty.")

    positives = np.asarray(scores_pos, dtype=np.float64)
    negatives = np.asarray(scores_neg, dtype=np.float64)
    ranks = rankdata(np.concatenate([positives, negatives]), method="average")
    n_pos, n_neg = positives.size, negatives.size
    statistic: float = float(ranks[:n_pos].sum()) - n_pos * (n_pos + 1) / 2.0

    return statistic / (n_pos * n_neg)


def node_classification_f1(
    embeddings: FloatMatrix,
    labels: Sequence[str],
    *,
    seed: int,
    train_fraction: float = 0.8,
) -> float:
    """
    Fits a logistic probe on a stratified share of the frozen embeddings and reports the micro-F1 on the rest.

    Raises:
        DegenerateTaskError: When the labels carry fewer than two classes.
    """
    if len(labels) != embeddings.shape[0]:
        raise InvalidArgumentError(
            f"{len(labels)} label(s) were given for {embeddings.shape[0]} embedding row(s)."
        )

    counts: Counter[str] = Counter(labels)

    if len(counts) < 2:
        raise DegenerateTaskError(
            f"Node classification needs at least two classes, got {sorted(counts)}."
        )

    random_state: int = derive_seed(seed, module="evaluation", purpose="nc-split") % (2**32)
    stratify = list(labels) if min(counts.values()) >= 2 else None
    train_x, test_x, train_y, test_y = train_test_split(
        np.asarray(embeddings),
        list(labels),
        train_size=train_fraction,
        random_state=random_state,
        stratify=stratify,
    )

    if len(set(train_y)) < 2:
        raise DegenerateTaskError("The training share of the labels holds a single class.")

    probe = LogisticRegression(max_iter=1000, random_state=random_state)
    probe.fit(train_x, train_y)

    return float(f1_score(test_y, probe.predict(test_x), average="micro"))


# # Task Metrics — END

# # Structural Signatures — START


@dataclass(frozen=True, eq=False)
class SignatureTable:
    """
    Per node: its type, its degree and the number of 4-cycles through it, over the union of all relations seen as one simple undirected graph.
    """

    nodes: tuple[NodeKey, ...]
    degrees: np.ndarray
    quadrilaterals: np.ndarray
    approximate: bool

    def signatures(self, mode: AttackSignature = AttackSignature.FULL) -> list[tuple]:
        if mode is AttackSignature.DEGREE_ONLY:
            return [(key[0], int(d)) for key, d in zip(self.nodes, self.degrees)]

        return [
            (key[0], int(d), int(q))
            for key, d, q in zip(self.nodes, self.degrees, self.quadrilaterals)
        ]

    def unique(self, mode: AttackSignature = AttackSignature.FULL) -> list[bool]:
        signatures = self.signatures(mode)
        counts: Counter[tuple] = Counter(signatures)
        return [counts[each] == 1 for each in signatures]


def as_networkx(graph: HeteroGraph) -> nx.Graph:
    view = nx.Graph()

    for each_type, each_ids in graph.node_ids.items():
        view.add_nodes_from((each_type, each) for each in each_ids)

    for each_relation, signature in graph.schema.relations.items():
        view.add_edges_from(
            ((signature.source, source), (signature.target, target))
            for source, target in graph.edges.get(each_relation, ())
            if (signature.source, source) != (signature.target, target)
        )

    return view


def _pairs_choose_two(counts: np.ndarray) -> np.ndarray:
    return counts * (counts - 1) // 2


def build_signature_table(graph: HeteroGraph, *, seed: int = 0) -> SignatureTable:
    """
    A 4-cycle through `v` is fixed by its opposite corner `w` and two common neighbours of `v` and `w`, so the count is the sum over `w != v` of C(common(v, w), 2). Above the exact edge limit only a sample of opposite corners is summed and scaled up.
    """
    view: nx.Graph = as_networkx(graph)
    nodes: list[NodeKey] = list(view.nodes)

    if not nodes:
        empty = np.zeros(0, dtype=np.int64)
        return SignatureTable(nodes=(), degrees=empty, quadrilaterals=empty, approximate=False)

    adjacency = sp.csr_matrix(nx.to_scipy_sparse_array(view, nodelist=nodes, dtype=np.int64))
    degrees = np.asarray(adjacency.sum(axis=1)).ravel().astype(np.int64)
    approximate: bool = view.number_of_edges() > EXACT_CYCLE_EDGE_LIMIT

    if not approximate:
        common = (adjacency @ adjacency).toarray()
        np.fill_diagonal(common, 0)
        quadrilaterals = _pairs_choose_two(common).sum(axis=1)
    else:
        rng = derive_generator(seed, module="evaluation", purpose="cycle-sample")
        columns = np.sort(
            rng.choice(len(nodes), size=min(APPROXIMATE_CYCLE_SAMPLE, len(nodes)), replace=False)
        )
        common = (adjacency @ adjacency[:, columns]).toarray()
        common[columns, np.arange(columns.size)] = 0
        quadrilaterals = np.rint(
            _pairs_choose_two(common).sum(axis=1) * (len(nodes) / columns.size)
        ).astype(np.int64)
        logger.warning(
            f"Counting 4-cycles over a sample of {columns.size} opposite corner(s), the signature table is approximate."
        )

    return SignatureTable(
        nodes=tuple(nodes),
        degrees=degrees,
        quadrilaterals=np.asarray(quadrilaterals, dtype=np.int64),
        approximate=approximate,
    )


def topology_attack(
    auxiliary: HeteroGraph,
    target: HeteroGraph,
    *,
    signature: AttackSignature = AttackSignature.FULL,
    seed: int = 0,
) -> AttackResult:
    """
    Matches every uniquely-signatured auxiliary node to the one target node carrying the same signature. Node identity is the ground truth, so a match is correct when both keys agree.

    Raises:
        AttackSchemaError: When the graphs do not share their node types.
    """
    if set(auxiliary.schema.node_types) != set(target.schema.node_types):
        raise AttackSchemaError(
            f"The auxiliary node types {sorted(auxiliary.schema.node_types)} differ from the target's {sorted(target.schema.node_types)}."
        )

    auxiliary_table = build_signature_table(auxiliary, seed=seed)
    target_table = build_signature_table(target, seed=seed)
    target_lookup: dict[tuple, list[NodeKey]] = {}

    for key, each_signature in zip(target_table.nodes, target_table.signatures(signature)):
        target_lookup.setdefault(each_signature, []).append(key)

    matches: list[AttackMatch] = []
    unique_count: int = 0

    for key, each_signature, is_unique in zip(
        auxiliary_table.nodes,
        auxiliary_table.signatures(signature),
        auxiliary_table.unique(signature),
    ):
        if not is_unique:
            continue

        unique_count += 1
        candidates: list[NodeKey] = target_lookup.get(each_signature, [])

        if len(candidates) == 1:
            matches.append(
                AttackMatch(
                    node_type=key[0],
                    auxiliary_id=key[1],
                    target_id=candidates[0][1],
                    correct=candidates[0] == key,
                )
            )

    correct_count: int = sum(each.correct for each in matches)
    rate: float | None = correct_count / unique_count if unique_count else None

    if rate is None:
        logger.warning("No auxiliary node has a unique signature, the attack rate is not applicable.")
    else:
        logger.info(f"Re-identified {correct_count} of {unique_count} unique node(s), rate {rate:.4f}.")

    return AttackResult(
        signature=signature,
        unique_count=unique_count,
        matched_count=len(matches),
        correct_count=correct_count,
        rate=rate,
        approximate=auxiliary_table.approximate or target_table.approximate,
        matches=matches,
    )


# # Structural Signatures — END

# # Experiments — START


def with_budget(
    config: RunConfig,
    epsilon: float,
    *,
    epsilon_f: float | None = None,
    epsilon_s: float | None = None,
    perturb_features: bool = True,
    perturb_topology: bool = True,
) -> RunConfig:
    """
    A copy of `config` spending `epsilon`. Without explicit shares the feature fraction of `config` is kept. An infinite budget switches both mechanisms off and keeps the current shares.
    """
    current: PrivacySpec = config.privacy
    kept = current.dict(exclude={"epsilon", "epsilon_f", "epsilon_s", "perturb_features", "perturb_topology"})

    if isinf(epsilon):
        privacy = PrivacySpec(
            **kept,
            epsilon=current.budget,
            epsilon_f=current.feature_budget,
            epsilon_s=current.topology_budget,
            perturb_features=False,
            perturb_topology=False,
        )
        return config.copy(update={"privacy": privacy})

    if epsilon_f is None and epsilon_s is None:
        epsilon_f, epsilon_s = split_budget(epsilon, current.feature_budget / current.budget)

    privacy = PrivacySpec(
        **kept,
        epsilon=epsilon,
        epsilon_f=epsilon_f,
        epsilon_s=epsilon_s,
        perturb_features=perturb_features,
        perturb_topology=perturb_topology,
    )
    return config.copy(update={"privacy": privacy})


def seed_series(root: int, count: int) -> list[int]:
    return [root + offset for offset in range(count)]


def _infeasible_record(config: RunConfig, epsilon: float, error: PrivacyBudgetExceeded) -> MetricsRecord:
    return MetricsRecord(
        task=config.task,
        dataset=str(config.dataset.path or "synthetic"),
        metric=config.evaluation.objective.value,
        value=None,
        seed=config.seed,
        epsilon=epsilon,
        epsilon_f=config.privacy.epsilon_f,
        epsilon_s=config.privacy.epsilon_s,
        delta=config.privacy.delta,
        perturb_features=config.privacy.perturb_features,
        perturb_topology=config.privacy.perturb_topology,
        status=RunStatus.INFEASIBLE,
        detail=error.message,
    )


def _evaluate_once(evaluator: Evaluator, config: RunConfig, epsilon: float) -> MetricsRecord:
    try:
        record = evaluator(config)
    except PrivacyBudgetExceeded as e:
        return _infeasible_record(config, epsilon, e)

    return record.copy(update={"epsilon": epsilon})


def run_epsilon_sweep(
    config: RunConfig,
    epsilons: Iterable[float],
    seeds: int,
    evaluator: Evaluator,
) -> list[MetricsRecord]:
    """
    One record per (epsilon, seed), sorted by epsilon. An epsilon the accountant rejects is kept as an infeasible record.
    """
    resolved: list[float] = sorted(set(float(each) for each in epsilons))

    if not resolved:
        raise InvalidArgumentError("The sweep needs at least one epsilon.")

    records: list[MetricsRecord] = []

    for each_epsilon in resolved:
        for each_seed in seed_series(config.seed, seeds):
            logger.info(f"Sweep point epsilon = {each_epsilon}, seed = {each_seed}.")
            swept = with_budget(config, each_epsilon).copy(update={"seed": each_seed})
            records.append(_evaluate_once(evaluator, swept, each_epsilon))

    return records


_ARM_SWITCHES: dict[AblationArm, tuple[bool, bool]] = {
    AblationArm.FEATURE_ONLY: (True, False),
    AblationArm.TOPOLOGY_ONLY: (False, True),
    AblationArm.BOTH: (True, True),
}


def run_ablation(
    config: RunConfig,
    evaluator: Evaluator,
    *,
    epsilon: float | None = None,
    seeds: int | None = None,
) -> dict[AblationArm, list[MetricsRecord]]:
    """
    The feature-only, topology-only and combined arms over the same seeds and the same budget split.
    """
    resolved_epsilon: float = config.evaluation.ablation_epsilon if epsilon is None else epsilon
    resolved_seeds: list[int] = seed_series(config.seed, seeds or config.evaluation.sweep_seeds)
    series: dict[AblationArm, list[MetricsRecord]] = {}

    for arm, (features_on, topology_on) in _ARM_SWITCHES.items():
        series[arm] = []

        for each_seed in resolved_seeds:
            arm_config = with_budget(
                config,
                resolved_epsilon,
                perturb_features=features_on,
                perturb_topology=topology_on,
            ).copy(update={"seed": each_seed})
            record = _evaluate_once(evaluator, arm_config, resolved_epsilon)
            series[arm].append(record.copy(update={"arm": arm}))

    return series


# # Experiments — END

# # Exports — START


def summarise(values: Sequence[float | None]) -> tuple[float | None, float | None, int]:
    present = np.array([each for each in values if each is not None], dtype=np.float64)

    if not present.size:
        return None, None, 0

    return float(present.mean()), float(present.std()), int(present.size)


def write_metrics_jsonl(path: Path, records: Iterable[MetricsRecord]) -> None:
    write_jsonl(path, records)


def write_curve_tsv(path: Path, records: Sequence[MetricsRecord]) -> None:
    """
    One row per epsilon with the mean, the standard deviation and the number of feasible seeds.
    """
    grouped: dict[float, list[MetricsRecord]] = {}

    for each in records:
        grouped.setdefault(each.epsilon, []).append(each)

    rows: list[list[object]] = []

    for each_epsilon in sorted(grouped, key=lambda value: inf if isinf(value) else value):
        mean, std, count = summarise([each.value for each in grouped[each_epsilon]])
        infeasible: int = sum(each.status is RunStatus.INFEASIBLE for each in grouped[each_epsilon])
        rows.append([each_epsilon, mean, std, count, infeasible])

    write_tsv(path, rows, columns=["epsilon", "mean", "std", "count", "infeasible"])


def write_ablation_tsv(path: Path, series: dict[AblationArm, list[MetricsRecord]]) -> None:
    rows: list[list[object]] = []

    for arm, records in series.items():
        mean, std, count = summarise([each.value for each in records])
        rows.append([arm.value, mean, std, count])

    write_tsv(path, rows, columns=["arm", "mean", "std", "count"])


# # Exports — END
