"""
Heterogeneous Graph (graph.py) | The typed graph model, its on-disk layout, meta-path subgraphs and link splits.

A dataset directory holds a `schema.cfg`, one `nodes_<type>.tsv` per node type (id, then feature values), one `edges_<relation>.tsv` per relation (source id, target id) and optionally `labels_<type>.tsv` (id, label). The graph and its subgraphs are immutable once built and can be shared read-only.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from logging import Logger, getLogger
from math import floor
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from frozendict import frozendict
from pandas.errors import ParserError
from pympler.asizeof import asizeof

from blueprint.schemas import ValidationReport, ValidationViolation
from core.constants import (
    EDGES_FILE_TEMPLATE,
    LABELS_FILE_TEMPLATE,
    LOGGER_NAME,
    NEGATIVE_SAMPLING_MAX_ROUNDS,
    NODES_FILE_TEMPLATE,
    SCHEMA_FILE_NAME,
    SIMPLEX_TOLERANCE,
    SPLIT_FILE_TEMPLATE,
    EdgeArray,
    FloatMatrix,
    MetaPathName,
    NodeId,
    NodeTypeName,
    RelationName,
    SplitRatios,
    SplitTag,
    ViolationKind,
)
from utils.exceptions import (
    DatasetIngestionError,
    EdgeSplitError,
    GraphValidationError,
    MetaPathSchemaError,
    NegativeSamplingError,
)
from utils.processors import derive_generator, read_tsv, write_tsv

logger: Logger = getLogger(LOGGER_NAME)

# * Ratio products such as 0.29 * 100 land a hair below the integer they represent.
_FLOOR_TOLERANCE: float = 1e-9

# # Schema — START


@dataclass(frozen=True)
class RelationSignature:
    name: RelationName
    source: NodeTypeName
    target: NodeTypeName


@dataclass(frozen=True)
class MetaPath:
    name: MetaPathName
    node_types: tuple[NodeTypeName, ...]
    relations: tuple[RelationName, ...]

    def __post_init__(self) -> None:
        if not self.node_types or len(self.relations) != len(self.node_types) - 1:
            raise MetaPathSchemaError(
                f"Meta-path `{self.name}` must alternate node types and relations, starting and ending with a node type."
            )

    @property
    def endpoint_type(self) -> NodeTypeName:
        return self.node_types[0]

    @property
    def steps(self) -> list[tuple[NodeTypeName, RelationName, NodeTypeName]]:
        return [
            (self.node_types[idx], self.relations[idx], self.node_types[idx + 1])
            for idx in range(len(self.relations))
        ]


@dataclass(frozen=True)
class GraphSchema:
    node_types: tuple[NodeTypeName, ...]
    relations: frozendict[RelationName, RelationSignature]
    metapaths: frozendict[MetaPathName, MetaPath] = field(default_factory=frozendict)
    target_relation: RelationName | None = None
    classify_type: NodeTypeName | None = None

    def step_orientation(
        self, source: NodeTypeName, relation: RelationName, target: NodeTypeName
    ) -> bool:
        """
        Returns True when the step follows the relation as declared and False when it follows it backwards.
        """
        if relation not in self.relations:
            raise MetaPathSchemaError(f"Unknown relation `{relation}`.")

        signature: RelationSignature = self.relations[relation]

        if (signature.source, signature.target) == (source, target):
            return True

        if (signature.target, signature.source) == (source, target):
            return False

        raise MetaPathSchemaError(
            f"The step ({source}, {relation}, {target}) does not match the relation signature ({signature.source}, {signature.target})."
        )

    def check_metapath(self, metapath: MetaPath) -> None:
        for each_type in metapath.node_types:
            if each_type not in self.node_types:
                raise MetaPathSchemaError(
                    f"Meta-path `{metapath.name}` references unknown node type `{each_type}`."
                )

        for source, relation, target in metapath.steps:
            self.step_orientation(source, relation, target)

        if metapath.node_types[0] != metapath.node_types[-1]:
            raise MetaPathSchemaError(
                f"Meta-path `{metapath.name}` must start and end on the same node type."
            )

    def metapaths_of(self, node_type: NodeTypeName) -> list[MetaPath]:
        return [
            each for each in self.metapaths.values() if each.endpoint_type == node_type
        ]


def load_schema(path: Path) -> GraphSchema:
    """
    Parses `schema.cfg`. Lines are `node <type>`, `relation <name> <source type> <target type>`, `metapath <name> <type> <relation> <type> ...`, `target <relation>` and `classify <type>`. Blank lines and `#` comments are skipped.
    """
    if not path.is_file():
        raise DatasetIngestionError(str(path), "the schema file does not exist.")

    node_types: list[NodeTypeName] = []
    relations: dict[RelationName, RelationSignature] = {}
    raw_metapaths: list[tuple[int, list[str]]] = []
    target_relation: RelationName | None = None
    classify_type: NodeTypeName | None = None

    for line_number, each_line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        tokens: list[str] = each_line.split("#", 1)[0].split()

        if not tokens:
            continue

        keyword, arguments = tokens[0], tokens[1:]

        if keyword == "node" and len(arguments) == 1:
            node_types.append(NodeTypeName(arguments[0]))
        elif keyword == "relation" and len(arguments) == 3:
            relations[RelationName(arguments[0])] = RelationSignature(
                name=RelationName(arguments[0]),
                source=NodeTypeName(arguments[1]),
                target=NodeTypeName(arguments[2]),
            )
        elif keyword == "metapath" and len(arguments) >= 2:
            raw_metapaths.append((line_number, arguments))
        elif keyword == "target" and len(arguments) == 1:
            target_relation = RelationName(arguments[0])
        elif keyword == "classify" and len(arguments) == 1:
            classify_type = NodeTypeName(arguments[0])
        else:
            raise DatasetIngestionError(
                str(path), f"line {line_number} is malformed: `{each_line.strip()}`."
            )

    for each_signature in relations.values():
        for each_type in (each_signature.source, each_signature.target):
            if each_type not in node_types:
                raise DatasetIngestionError(
                    str(path),
                    f"relation `{each_signature.name}` references undeclared node type `{each_type}`.",
                )

    if target_relation is not None and target_relation not in relations:
        raise DatasetIngestionError(
            str(path), f"the target relation `{target_relation}` is undeclared."
        )

    if classify_type is not None and classify_type not in node_types:
        raise DatasetIngestionError(
            str(path), f"the classified node type `{classify_type}` is undeclared."
        )

    schema = GraphSchema(
        node_types=tuple(node_types),
        relations=frozendict(relations),
        target_relation=target_relation,
        classify_type=classify_type,
    )
    metapaths: dict[MetaPathName, MetaPath] = {}

    for line_number, (name, *sequence) in raw_metapaths:
        if len(sequence) % 2 == 0:
            raise DatasetIngestionError(
                str(path),
                f"meta-path `{name}` on line {line_number} must alternate node types and relations.",
            )

        metapath = MetaPath(
            name=MetaPathName(name),
            node_types=tuple(NodeTypeName(each) for each in sequence[0::2]),
            relations=tuple(RelationName(each) for each in sequence[1::2]),
        )
        schema.check_metapath(metapath)
        metapaths[metapath.name] = metapath

    return replace(schema, metapaths=frozendict(metapaths))


def write_schema(schema: GraphSchema, path: Path) -> None:
    lines: list[str] = [f"node {each}" for each in schema.node_types]
    lines.extend(
        f"relation {each.name} {each.source} {each.target}"
        for each in schema.relations.values()
    )

    for each_metapath in schema.metapaths.values():
        sequence: list[str] = [each_metapath.node_types[0]]

        for _, relation, target in each_metapath.steps:
            sequence.extend((relation, target))

        lines.append(f"metapath {each_metapath.name} {' '.join(sequence)}")

    if schema.target_relation is not None:
        lines.append(f"target {schema.target_relation}")

    if schema.classify_type is not None:
        lines.append(f"classify {schema.classify_type}")

    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# # Schema — END

# # Graph — START


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    """
    Typed nodes and edges. The type of a node is the key it is stored under and the type of an edge is the relation it is stored under, so both mappings are total by construction. A feature entry of None stands for one-hot identity features.
    """

    schema: GraphSchema
    node_ids: frozendict[NodeTypeName, tuple[NodeId, ...]]
    edges: frozendict[RelationName, tuple[tuple[NodeId, NodeId], ...]]
    features: frozendict[NodeTypeName, FloatMatrix | None]
    labels: frozendict[NodeTypeName, frozendict[NodeId, str]] = field(
        default_factory=frozendict
    )

    @classmethod
    def create(
        cls,
        schema: GraphSchema,
        *,
        node_ids: Mapping[str, Sequence[str]],
        edges: Mapping[str, Iterable[tuple[str, str]]],
        features: Mapping[str, FloatMatrix | Sequence[Sequence[float]] | None] | None = None,
        labels: Mapping[str, Mapping[str, str]] | None = None,
    ) -> "HeteroGraph":
        resolved_features: dict[NodeTypeName, FloatMatrix | None] = {}

        for each_type in schema.node_types:
            matrix = (features or {}).get(each_type)

            if matrix is None:
                resolved_features[each_type] = None
                continue

            resolved_matrix = np.array(matrix, dtype=np.float64, ndmin=2)
            resolved_matrix.setflags(write=False)
            resolved_features[each_type] = resolved_matrix

        return cls(
            schema=schema,
            node_ids=frozendict(
                {
                    NodeTypeName(each_type): tuple(
                        NodeId(each) for each in node_ids.get(each_type, ())
                    )
                    for each_type in schema.node_types
                }
            ),
            edges=frozendict(
                {
                    RelationName(each_relation): tuple(
                        (NodeId(source), NodeId(target))
                        for source, target in edges.get(each_relation, ())
                    )
                    for each_relation in [
                        *schema.relations,
                        *(each for each in edges if each not in schema.relations),
                    ]
                }
            ),
            features=frozendict(resolved_features),
            labels=frozendict(
                {
                    NodeTypeName(each_type): frozendict(each_labels)
                    for each_type, each_labels in (labels or {}).items()
                }
            ),
        )

    @cached_property
    def _node_index(self) -> dict[NodeTypeName, dict[NodeId, int]]:
        index: dict[NodeTypeName, dict[NodeId, int]] = {}

        for each_type, each_ids in self.node_ids.items():
            type_index: dict[NodeId, int] = {}

            for position, each_id in enumerate(each_ids):
                type_index.setdefault(each_id, position)

            index[each_type] = type_index

        return index

    def node_index(self, node_type: NodeTypeName) -> dict[NodeId, int]:
        return self._node_index[node_type]

    def node_count(self, node_type: NodeTypeName) -> int:
        return len(self.node_ids[node_type])

    def edge_count(self, relation: RelationName) -> int:
        return len(self.edges.get(relation, ()))

    @property
    def node_counts(self) -> dict[str, int]:
        return {each: self.node_count(each) for each in self.schema.node_types}

    @property
    def edge_counts(self) -> dict[str, int]:
        return {each: self.edge_count(each) for each in self.schema.relations}

    def edge_index(self, relation: RelationName) -> EdgeArray:
        """
        The edges of `relation` as an (E, 2) array of row positions within the source and the target node types.
        """
        signature: RelationSignature = self.schema.relations[relation]
        source_index = self.node_index(signature.source)
        target_index = self.node_index(signature.target)

        try:
            pairs = [
                (source_index[source], target_index[target])
                for source, target in self.edges.get(relation, ())
            ]
        except KeyError as e:
            raise GraphValidationError(
                [f"relation `{relation}` has an edge with unknown endpoint {e}"]
            ) from e

        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def adjacency(self, relation: RelationName, *, forward: bool = True) -> sp.csr_matrix:
        signature: RelationSignature = self.schema.relations[relation]
        index: EdgeArray = self.edge_index(relation)
        shape: tuple[int, int] = (
            self.node_count(signature.source),
            self.node_count(signature.target),
        )
        matrix = sp.csr_matrix(
            (np.ones(index.shape[0], dtype=np.int64), (index[:, 0], index[:, 1])),
            shape=shape,
        )
        matrix.sum_duplicates()
        matrix.data[:] = 1

        return matrix if forward else matrix.T.tocsr()

    def feature_matrix(self, node_type: NodeTypeName) -> FloatMatrix:
        matrix: FloatMatrix | None = self.features.get(node_type)
        return np.eye(self.node_count(node_type)) if matrix is None else np.asarray(matrix)

    def feature_dimension(self, node_type: NodeTypeName) -> int:
        matrix: FloatMatrix | None = self.features.get(node_type)
        return self.node_count(node_type) if matrix is None else int(matrix.shape[1])

    def with_edges(self, relation: RelationName, edges: Iterable[tuple[str, str]]) -> "HeteroGraph":
        return replace(
            self,
            edges=self.edges.set(
                relation, tuple((NodeId(s), NodeId(t)) for s, t in edges)
            ),
        )


def validate(graph: HeteroGraph) -> ValidationReport:
    """
    Lists every broken invariant of the graph. Nothing is raised here, the caller decides what a violation means.
    """
    violations: list[ValidationViolation] = []
    known_types: set[NodeTypeName] = set(graph.schema.node_types)

    for each_type, each_ids in graph.node_ids.items():
        seen: set[NodeId] = set()

        for each_id in each_ids:
            if each_id in seen:
                violations.append(
                    ValidationViolation(
                        kind=ViolationKind.DUPLICATE_NODE,
                        detail=f"`{each_id}` appears more than once in `{each_type}`.",
                        node_type=each_type,
                    )
                )
            seen.add(each_id)

        matrix: FloatMatrix | None = graph.features.get(each_type)

        if matrix is not None and matrix.shape[0] != len(each_ids):
            violations.append(
                ValidationViolation(
                    kind=ViolationKind.MISSING_FEATURE_ROWS,
                    detail=f"`{each_type}` has {len(each_ids)} node(s) but {matrix.shape[0]} feature row(s).",
                    node_type=each_type,
                )
            )

    for each_relation, each_edges in graph.edges.items():
        if each_relation not in graph.schema.relations:
            violations.append(
                ValidationViolation(
                    kind=ViolationKind.UNKNOWN_RELATION,
                    detail=f"`{each_relation}` holds {len(each_edges)} edge(s) but is not declared.",
                    relation=each_relation,
                )
            )
            continue

        signature: RelationSignature = graph.schema.relations[each_relation]
        seen_edges: set[tuple[NodeId, NodeId]] = set()

        for source, target in each_edges:
            if (source, target) in seen_edges:
                violations.append(
                    ValidationViolation(
                        kind=ViolationKind.DUPLICATE_EDGE,
                        detail=f"edge ({source}, {target}) appears more than once in `{each_relation}`.",
                        relation=each_relation,
                        edge=(source, target),
                    )
                )
            seen_edges.add((source, target))

            endpoint_states: list[ViolationKind | None] = []

            for each_id, expected_type in ((source, signature.source), (target, signature.target)):
                if each_id in graph.node_index(expected_type):
                    endpoint_states.append(None)
                elif any(
                    each_id in graph.node_index(other)
                    for other in known_types - {expected_type}
                ):
                    endpoint_states.append(ViolationKind.SIGNATURE_MISMATCH)
                else:
                    endpoint_states.append(ViolationKind.DANGLING_ENDPOINT)

            # * One entry per edge; an unknown endpoint outranks a mistyped one.
            if ViolationKind.DANGLING_ENDPOINT in endpoint_states:
                kind = ViolationKind.DANGLING_ENDPOINT
            elif ViolationKind.SIGNATURE_MISMATCH in endpoint_states:
                kind = ViolationKind.SIGNATURE_MISMATCH
            else:
                continue

            violations.append(
                ValidationViolation(
                    kind=kind,
                    detail=f"edge ({source}, {target}) of `{each_relation}` expects ({signature.source}, {signature.target}).",
                    relation=each_relation,
                    edge=(source, target),
                )
            )

    for each_violation in violations:
        logger.warning(f"Graph violation, {each_violation}")

    return ValidationReport(
        node_counts=graph.node_counts,
        edge_counts={each: len(edges) for each, edges in graph.edges.items()},
        violations=violations,
    )


# # Graph — END

# # Dataset Files — START


def load_dataset(path: Path, schema: GraphSchema | None = None) -> HeteroGraph:
    """
    Reads a dataset directory into a validated graph.

    Raises:
        DatasetIngestionError: When a file is missing or malformed, naming the file.
        GraphValidationError: When the loaded graph breaks any invariant.
    """
    if not path.is_dir():
        raise DatasetIngestionError(str(path), "the dataset directory does not exist.")

    resolved_schema: GraphSchema = schema or load_schema(path / SCHEMA_FILE_NAME)
    node_ids: dict[str, list[str]] = {}
    features: dict[str, FloatMatrix | None] = {}
    edges: dict[str, list[tuple[str, str]]] = {}
    labels: dict[str, dict[str, str]] = {}

    for each_type in resolved_schema.node_types:
        rows = _read_dataset_file(path / NODES_FILE_TEMPLATE.format(node_type=each_type))
        node_ids[each_type] = [each_row[0] for each_row in rows]
        widths: set[int] = {len(each_row) - 1 for each_row in rows}

        if len(widths) > 1:
            raise DatasetIngestionError(
                NODES_FILE_TEMPLATE.format(node_type=each_type),
                f"rows carry different feature counts {sorted(widths)}.",
            )

        if not widths or widths == {0}:
            features[each_type] = None
            continue

        try:
            features[each_type] = np.array(
                [[float(each) for each in each_row[1:]] for each_row in rows],
                dtype=np.float64,
            )
        except ValueError as e:
            raise DatasetIngestionError(
                NODES_FILE_TEMPLATE.format(node_type=each_type), str(e)
            ) from e

    for each_type in resolved_schema.node_types:
        label_path: Path = path / LABELS_FILE_TEMPLATE.format(node_type=each_type)

        if label_path.is_file():
            labels[each_type] = _read_labels(label_path)

    for each_relation in resolved_schema.relations:
        file_name: str = EDGES_FILE_TEMPLATE.format(relation=each_relation)
        rows = _read_dataset_file(path / file_name)

        if any(len(each_row) != 2 for each_row in rows):
            raise DatasetIngestionError(file_name, "every edge row needs exactly two ids.")

        edges[each_relation] = [(each_row[0], each_row[1]) for each_row in rows]

    graph = HeteroGraph.create(
        resolved_schema,
        node_ids=node_ids,
        edges=edges,
        features=features,
        labels=labels,
    )
    report: ValidationReport = validate(graph)

    if not report.is_valid:
        raise GraphValidationError(report.violations)

    logger.info(
        f"Loaded `{path}`: nodes {graph.node_counts}, edges {graph.edge_counts}, footprint {asizeof(graph) / 1024:.1f} KiB."
    )
    return graph


def load_labels(graph: HeteroGraph, node_type: NodeTypeName) -> list[str]:
    """
    The label of every node of `node_type`, in row order.
    """
    type_labels = graph.labels.get(node_type)

    if not type_labels:
        raise DatasetIngestionError(
            LABELS_FILE_TEMPLATE.format(node_type=node_type), "no labels were loaded."
        )

    missing: list[NodeId] = [each for each in graph.node_ids[node_type] if each not in type_labels]

    if missing:
        raise DatasetIngestionError(
            LABELS_FILE_TEMPLATE.format(node_type=node_type),
            f"{len(missing)} node(s) have no label, first is `{missing[0]}`.",
        )

    return [type_labels[each] for each in graph.node_ids[node_type]]


def write_dataset(graph: HeteroGraph, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    write_schema(graph.schema, path / SCHEMA_FILE_NAME)

    for each_type in graph.schema.node_types:
        matrix: FloatMatrix | None = graph.features.get(each_type)
        rows: list[list[object]] = [
            [each_id] + ([] if matrix is None else matrix[position].tolist())
            for position, each_id in enumerate(graph.node_ids[each_type])
        ]
        write_tsv(
            path / NODES_FILE_TEMPLATE.format(node_type=each_type),
            rows,
            header_comment=f"{each_type}: id, features",
        )

        if graph.labels.get(each_type):
            write_tsv(
                path / LABELS_FILE_TEMPLATE.format(node_type=each_type),
                list(graph.labels[each_type].items()),
                header_comment=f"{each_type}: id, label",
            )

    for each_relation in graph.schema.relations:
        write_tsv(
            path / EDGES_FILE_TEMPLATE.format(relation=each_relation),
            graph.edges.get(each_relation, ()),
            header_comment=f"{each_relation}: source id, target id",
        )


def _read_dataset_file(path: Path) -> list[list[str]]:
    if not path.is_file():
        raise DatasetIngestionError(path.name, "the file does not exist.")

    try:
        return read_tsv(path)
    except (ParserError, UnicodeDecodeError) as e:
        raise DatasetIngestionError(path.name, str(e)) from e


def _read_labels(path: Path) -> dict[str, str]:
    rows = _read_dataset_file(path)

    if any(len(each_row) != 2 for each_row in rows):
        raise DatasetIngestionError(path.name, "every label row needs an id and a label.")

    return {each_row[0]: each_row[1] for each_row in rows}


# # Dataset Files — END

# # Semantic Subgraphs — START


@dataclass(frozen=True, eq=False)
class SemanticSubgraph:
    """
    The homogeneous graph over the end type of a meta-path. `pairs` holds (u, w) row positions such that some walk realising the meta-path starts at u and ends at w.
    """

    metapath: MetaPath
    node_type: NodeTypeName
    num_nodes: int
    pairs: EdgeArray
    graph: HeteroGraph = field(repr=False)

    @cached_property
    def attention_pairs(self) -> EdgeArray:
        """
        The pairs that attention runs over, with a self-loop for every node without a neighbour.
        """
        has_neighbour = np.zeros(self.num_nodes, dtype=bool)
        has_neighbour[self.pairs[:, 0]] = True
        isolated = np.flatnonzero(~has_neighbour)
        loops = np.stack([isolated, isolated], axis=1).astype(np.int64)

        return np.concatenate([self.pairs, loops]).reshape(-1, 2)

    @cached_property
    def undirected_pairs(self) -> EdgeArray:
        ordered = np.sort(self.pairs, axis=1)
        return np.unique(ordered, axis=0).reshape(-1, 2)


def extract_semantic_subgraph(graph: HeteroGraph, metapath: MetaPath) -> SemanticSubgraph:
    """
    Builds the semantic subgraph of `metapath` by chaining boolean adjacency products. Self pairs are dropped and repeated walks collapse into one pair.
    """
    graph.schema.check_metapath(metapath)

    node_type: NodeTypeName = metapath.endpoint_type
    num_nodes: int = graph.node_count(node_type)

    if not metapath.relations:
        return SemanticSubgraph(
            metapath=metapath,
            node_type=node_type,
            num_nodes=num_nodes,
            pairs=np.empty((0, 2), dtype=np.int64),
            graph=graph,
        )

    reach: sp.csr_matrix = sp.identity(num_nodes, dtype=np.int64, format="csr")

    for source, relation, target in metapath.steps:
        reach = (
            reach
            @ graph.adjacency(
                relation, forward=graph.schema.step_orientation(source, relation, target)
            )
        ).tocsr()
        reach.data[:] = 1

    coordinates = reach.tocoo()
    off_diagonal = coordinates.row != coordinates.col
    pairs = np.stack(
        [coordinates.row[off_diagonal], coordinates.col[off_diagonal]], axis=1
    ).astype(np.int64)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    pairs.setflags(write=False)

    logger.debug(
        f"Semantic subgraph `{metapath.name}` over `{node_type}`: {num_nodes} node(s), {pairs.shape[0]} pair(s)."
    )
    return SemanticSubgraph(
        metapath=metapath,
        node_type=node_type,
        num_nodes=num_nodes,
        pairs=pairs,
        graph=graph,
    )


# # Semantic Subgraphs — END

# # Link Splits — START


@dataclass(frozen=True, eq=False)
class EdgeSplit:
    relation: RelationName
    seed: int
    train: EdgeArray
    val: EdgeArray
    test: EdgeArray
    val_neg: EdgeArray
    test_neg: EdgeArray

    def by_tag(self) -> dict[SplitTag, EdgeArray]:
        return {
            SplitTag.TRAIN: self.train,
            SplitTag.VAL: self.val,
            SplitTag.TEST: self.test,
            SplitTag.VAL_NEG: self.val_neg,
            SplitTag.TEST_NEG: self.test_neg,
        }


def sample_non_edges(
    *,
    num_sources: int,
    num_targets: int,
    forbidden: set[tuple[int, int]],
    count: int,
    rng: np.random.Generator,
    distinct: bool,
    exclude_self: bool,
) -> EdgeArray:
    """
    Draws `count` (source, target) positions uniformly among the pairs outside `forbidden`.

    Raises:
        NegativeSamplingError: When the candidate pool cannot supply `count` pairs.
    """
    pool_size: int = num_sources * num_targets - len(forbidden)

    if exclude_self:
        pool_size -= sum(
            1 for each in range(min(num_sources, num_targets)) if (each, each) not in forbidden
        )

    if count == 0:
        return np.empty((0, 2), dtype=np.int64)

    if pool_size <= 0 or (distinct and pool_size < count):
        raise NegativeSamplingError(
            f"Only {max(pool_size, 0)} candidate non-edge(s) exist for {count} requested negative(s).",
            "Lower the negative count or use a sparser relation.",
        )

    chosen: list[tuple[int, int]] = []
    chosen_set: set[tuple[int, int]] = set()

    for _ in range(NEGATIVE_SAMPLING_MAX_ROUNDS):
        remaining: int = count - len(chosen)
        sources = rng.integers(0, num_sources, size=2 * remaining)
        targets = rng.integers(0, num_targets, size=2 * remaining)

        for source, target in zip(sources.tolist(), targets.tolist()):
            pair = (source, target)

            if pair in forbidden or (exclude_self and source == target):
                continue

            if distinct and pair in chosen_set:
                continue

            chosen.append(pair)
            chosen_set.add(pair)

            if len(chosen) == count:
                return np.array(chosen, dtype=np.int64)

    # - Dense pools reject most draws; enumerate what is left instead.
    candidates = np.array(
        [
            (source, target)
            for source in range(num_sources)
            for target in range(num_targets)
            if (source, target) not in forbidden
            and not (exclude_self and source == target)
            and not (distinct and (source, target) in chosen_set)
        ],
        dtype=np.int64,
    ).reshape(-1, 2)
    picks = rng.choice(candidates.shape[0], size=count - len(chosen), replace=not distinct)

    return np.concatenate([np.array(chosen, dtype=np.int64).reshape(-1, 2), candidates[picks]])


def split_edges(
    graph: HeteroGraph, relation: RelationName, ratios: SplitRatios, seed: int
) -> EdgeSplit:
    """
    Partitions the edges of `relation` into train, validation and test positives, with as many uniform type-correct non-edges as there are validation and test positives.

    The validation and test sizes are the floors of their ratio times the edge count, the remainder goes to training.
    """
    if relation not in graph.schema.relations:
        raise EdgeSplitError(f"Unknown relation `{relation}`.")

    if any(each < 0.0 for each in ratios) or abs(sum(ratios) - 1.0) > SIMPLEX_TOLERANCE:
        raise EdgeSplitError(f"The split ratios {ratios} must be nonnegative and sum to 1.")

    signature: RelationSignature = graph.schema.relations[relation]
    edges: EdgeArray = graph.edge_index(relation).reshape(-1, 2)
    total: int = edges.shape[0]
    distinct: int = np.unique(edges, axis=0).shape[0]

    if distinct != total:
        raise EdgeSplitError(
            f"`{relation}` repeats {total - distinct} edge(s), a split would not partition its edges."
        )

    val_size: int = floor(ratios[1] * total + _FLOOR_TOLERANCE)
    test_size: int = floor(ratios[2] * total + _FLOOR_TOLERANCE)

    for label, ratio, size in (("validation", ratios[1], val_size), ("test", ratios[2], test_size)):
        if ratio > 0.0 and size == 0:
            raise EdgeSplitError(
                f"`{relation}` has {total} edge(s), too few for a nonempty {label} set at ratio {ratio}."
            )

    permutation = derive_generator(seed, module="graph", purpose="split").permutation(total)
    val = edges[np.sort(permutation[:val_size])]
    test = edges[np.sort(permutation[val_size : val_size + test_size])]
    train = edges[np.sort(permutation[val_size + test_size :])]

    negatives = sample_non_edges(
        num_sources=graph.node_count(signature.source),
        num_targets=graph.node_count(signature.target),
        forbidden={(int(s), int(t)) for s, t in edges},
        count=val_size + test_size,
        rng=derive_generator(seed, module="graph", purpose="split-negatives"),
        distinct=True,
        exclude_self=signature.source == signature.target,
    )

    logger.info(
        f"Split `{relation}` (seed {seed}): train {train.shape[0]}, val {val_size}, test {test_size}, negatives {negatives.shape[0]}."
    )
    return EdgeSplit(
        relation=relation,
        seed=seed,
        train=train,
        val=val,
        test=test,
        val_neg=negatives[:val_size],
        test_neg=negatives[val_size:],
    )


def write_split(split: EdgeSplit, graph: HeteroGraph, directory: Path) -> Path:
    signature: RelationSignature = graph.schema.relations[split.relation]
    source_ids = graph.node_ids[signature.source]
    target_ids = graph.node_ids[signature.target]
    path: Path = directory / SPLIT_FILE_TEMPLATE.format(relation=split.relation, seed=split.seed)

    write_tsv(
        path,
        [
            (source_ids[source], target_ids[target], tag.value)
            for tag, pairs in split.by_tag().items()
            for source, target in pairs.tolist()
        ],
        header_comment="src, dst, tag",
    )
    return path


def read_split(graph: HeteroGraph, relation: RelationName, seed: int, directory: Path) -> EdgeSplit:
    signature: RelationSignature = graph.schema.relations[relation]
    source_index = graph.node_index(signature.source)
    target_index = graph.node_index(signature.target)
    path: Path = directory / SPLIT_FILE_TEMPLATE.format(relation=relation, seed=seed)
    buckets: dict[SplitTag, list[tuple[int, int]]] = {each: [] for each in SplitTag}

    for each_row in _read_dataset_file(path):
        try:
            buckets[SplitTag(each_row[2])].append(
                (source_index[NodeId(each_row[0])], target_index[NodeId(each_row[1])])
            )
        except (IndexError, KeyError, ValueError) as e:
            raise DatasetIngestionError(path.name, f"row {each_row} is invalid: {e}") from e

    as_array = {
        tag: np.array(pairs, dtype=np.int64).reshape(-1, 2) for tag, pairs in buckets.items()
    }
    return EdgeSplit(
        relation=relation,
        seed=seed,
        train=as_array[SplitTag.TRAIN],
        val=as_array[SplitTag.VAL],
        test=as_array[SplitTag.TEST],
        val_neg=as_array[SplitTag.VAL_NEG],
        test_neg=as_array[SplitTag.TEST_NEG],
    )


# # Link Splits — END

# # Rewiring — START


def rewire_relation(
    graph: HeteroGraph, relation: RelationName, swaps: int, seed: int
) -> HeteroGraph:
    """
    Returns a copy of `graph` where `relation` went through `swaps` degree-preserving double-edge swaps, (a, b) + (c, d) into (a, d) + (c, b).
    """
    signature: RelationSignature = graph.schema.relations[relation]
    edges: list[tuple[NodeId, NodeId]] = list(dict.fromkeys(graph.edges.get(relation, ())))
    present: set[tuple[NodeId, NodeId]] = set(edges)
    rng = derive_generator(seed, module="graph", purpose="rewire")
    completed: int = 0

    if len(edges) < 2:
        return graph

    for _ in range(10 * swaps):
        if completed == swaps:
            break

        first, second = rng.choice(len(edges), size=2, replace=False).tolist()
        (a, b), (c, d) = edges[first], edges[second]

        if a == c or b == d or (a, d) in present or (c, b) in present:
            continue

        if signature.source == signature.target and (a == d or c == b):
            continue

        present -= {(a, b), (c, d)}
        present |= {(a, d), (c, b)}
        edges[first], edges[second] = (a, d), (c, b)
        completed += 1

    logger.debug(f"Rewired `{relation}` with {completed} of {swaps} requested swap(s).")
    return graph.with_edges(relation, edges)


# # Rewiring — END
