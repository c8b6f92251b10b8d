"""
Synthetic Dataset (synthetic.py) | A small paper / author / field graph with planted communities.

Papers, authors and fields are spread evenly over the communities. Each paper links to a few authors and a single field, drawn from its own community most of the time. Papers and authors get noisy community features, fields have none. Paper labels are their community.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from logging import Logger, getLogger
from pathlib import Path

import numpy as np
from frozendict import frozendict

from blueprint.schemas import DatasetLedger
from core.constants import (
    LOGGER_NAME,
    SYNTHETIC_AUTHORS_PER_PAPER,
    SYNTHETIC_COMMUNITIES,
    SYNTHETIC_IN_COMMUNITY_PROBABILITY,
    SYNTHETIC_NODE_COUNTS,
    FloatMatrix,
    MetaPathName,
    NodeTypeName,
    RelationName,
)
from core.graph import (
    GraphSchema,
    HeteroGraph,
    MetaPath,
    RelationSignature,
    write_dataset,
)
from utils.processors import derive_generator

logger: Logger = getLogger(LOGGER_NAME)

_FEATURE_NOISE: float = 0.3

PAPER, AUTHOR, FIELD = NodeTypeName("paper"), NodeTypeName("author"), NodeTypeName("field")
WRITES, BELONGS = RelationName("paper_author"), RelationName("paper_field")


def synthetic_schema() -> GraphSchema:
    def metapath(name: str, *sequence: str) -> MetaPath:
        return MetaPath(
            name=MetaPathName(name),
            node_types=tuple(NodeTypeName(each) for each in sequence[0::2]),
            relations=tuple(RelationName(each) for each in sequence[1::2]),
        )

    metapaths: list[MetaPath] = [
        metapath("PAP", PAPER, WRITES, AUTHOR, WRITES, PAPER),
        metapath("PFP", PAPER, BELONGS, FIELD, BELONGS, PAPER),
        metapath("APA", AUTHOR, WRITES, PAPER, WRITES, AUTHOR),
        metapath("FPF", FIELD, BELONGS, PAPER, BELONGS, FIELD),
    ]
    return GraphSchema(
        node_types=(PAPER, AUTHOR, FIELD),
        relations=frozendict(
            {
                WRITES: RelationSignature(name=WRITES, source=PAPER, target=AUTHOR),
                BELONGS: RelationSignature(name=BELONGS, source=PAPER, target=FIELD),
            }
        ),
        metapaths=frozendict({each.name: each for each in metapaths}),
        target_relation=WRITES,
        classify_type=PAPER,
    )


def _pick_in_community(
    rng: np.random.Generator,
    membership: np.ndarray,
    community: int,
    count: int,
) -> list[int]:
    own: np.ndarray = np.flatnonzero(membership == community)
    other: np.ndarray = np.flatnonzero(membership != community)
    picked: list[int] = []

    while len(picked) < count:
        pool = own if rng.random() < SYNTHETIC_IN_COMMUNITY_PROBABILITY else other
        candidate = int(rng.choice(pool))

        if candidate not in picked:
            picked.append(candidate)

    return picked


def _community_features(
    rng: np.random.Generator, membership: np.ndarray
) -> FloatMatrix:
    return np.eye(SYNTHETIC_COMMUNITIES)[membership] + rng.normal(
        0.0, _FEATURE_NOISE, size=(membership.size, SYNTHETIC_COMMUNITIES)
    )


def generate_synthetic_graph(seed: int) -> HeteroGraph:
    rng = derive_generator(seed, module="synthetic", purpose="graph")
    membership: dict[str, np.ndarray] = {
        each_type: np.arange(count) % SYNTHETIC_COMMUNITIES
        for each_type, count in SYNTHETIC_NODE_COUNTS.items()
    }
    node_ids: dict[str, list[str]] = {
        each_type: [f"{each_type[0]}{idx}" for idx in range(count)]
        for each_type, count in SYNTHETIC_NODE_COUNTS.items()
    }
    writes: list[tuple[str, str]] = []
    belongs: list[tuple[str, str]] = []

    for paper_position, community in enumerate(membership[PAPER].tolist()):
        paper_id: str = node_ids[PAPER][paper_position]

        for each_author in _pick_in_community(
            rng, membership[AUTHOR], community, SYNTHETIC_AUTHORS_PER_PAPER
        ):
            writes.append((paper_id, node_ids[AUTHOR][each_author]))

        (each_field,) = _pick_in_community(rng, membership[FIELD], community, 1)
        belongs.append((paper_id, node_ids[FIELD][each_field]))

    return HeteroGraph.create(
        synthetic_schema(),
        node_ids=node_ids,
        edges={WRITES: writes, BELONGS: belongs},
        features={
            PAPER: _community_features(rng, membership[PAPER]),
            AUTHOR: _community_features(rng, membership[AUTHOR]),
            FIELD: None,
        },
        labels={
            PAPER: {
                each_id: f"c{community}"
                for each_id, community in zip(node_ids[PAPER], membership[PAPER].tolist())
            }
        },
    )


def generate_synthetic_dataset(path: Path, seed: int) -> DatasetLedger:
    """
    Writes the synthetic graph under `path` and returns the counts that were written, for checking a later load against.
    """
    graph: HeteroGraph = generate_synthetic_graph(seed)
    write_dataset(graph, path)

    ledger = DatasetLedger(
        node_counts=graph.node_counts,
        edge_counts=graph.edge_counts,
        label_counts={each: len(labels) for each, labels in graph.labels.items()},
        seed=seed,
    )
    logger.info(f"Synthetic dataset written to `{path}`: {ledger.node_counts}, {ledger.edge_counts}.")
    return ledger
