from collections import Counter
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from core.constants import (
    EDGES_FILE_TEMPLATE,
    SCHEMA_FILE_NAME,
    MetaPathName,
    NodeTypeName,
    RelationName,
    ViolationKind,
)
from core.graph import (
    GraphSchema,
    HeteroGraph,
    MetaPath,
    extract_semantic_subgraph,
    load_dataset,
    load_labels,
    load_schema,
    read_split,
    rewire_relation,
    sample_non_edges,
    split_edges,
    validate,
    write_dataset,
    write_split,
)
from core.synthetic import generate_synthetic_dataset
from utils.exceptions import (
    DatasetIngestionError,
    EdgeSplitError,
    GraphValidationError,
    MetaPathSchemaError,
    NegativeSamplingError,
)

WRITES = RelationName("writes")


def _walk_pairs(edges: list[tuple[str, str]], *, via_source: bool) -> set[tuple[int, int]]:
    # * Pairs joined by one shared neighbour, by plain enumeration of two-step walks.
    by_middle: dict[str, list[int]] = {}

    for source, target in edges:
        end, middle = (source, target) if via_source else (target, source)
        by_middle.setdefault(middle, []).append(int(end[1:]))

    return {
        (u, w)
        for ends in by_middle.values()
        for u, w in product(ends, ends)
        if u != w
    }


# # Schema


def test_load_schema_reads_every_declaration(tmp_path: Path) -> None:
    path = tmp_path / SCHEMA_FILE_NAME
    path.write_text(
        "# toy\n"
        "node paper\n"
        "node author\n"
        "relation writes paper author\n"
        "metapath PAP paper writes author writes paper\n"
        "metapath APA author writes paper writes author  # backwards first step\n"
        "target writes\n"
        "classify paper\n",
        encoding="utf-8",
    )

    schema = load_schema(path)

    assert schema.node_types == ("paper", "author")
    assert schema.relations[WRITES].source == "paper"
    assert set(schema.metapaths) == {"PAP", "APA"}
    assert schema.metapaths[MetaPathName("APA")].relations == ("writes", "writes")
    assert schema.target_relation == "writes"
    assert schema.classify_type == "paper"


@pytest.mark.parametrize(
    "content",
    [
        "node paper\nrelation writes paper\n",
        "node paper\nrelation writes paper author\n",
        "node paper\nnode author\nrelation writes paper author\ntarget cites\n",
        "node paper\nnode author\nrelation writes paper author\nmetapath PAP paper writes author writes\n",
    ],
)
def test_load_schema_refuses_malformed_files(tmp_path: Path, content: str) -> None:
    path = tmp_path / SCHEMA_FILE_NAME
    path.write_text(content, encoding="utf-8")

    with pytest.raises(DatasetIngestionError):
        load_schema(path)


def test_metapath_with_a_mismatched_step_is_refused(toy_schema: GraphSchema) -> None:
    broken = MetaPath(
        name=MetaPathName("PPP"),
        node_types=(NodeTypeName("paper"), NodeTypeName("paper")),
        relations=(WRITES,),
    )

    with pytest.raises(MetaPathSchemaError):
        toy_schema.check_metapath(broken)


def test_metapath_must_alternate() -> None:
    with pytest.raises(MetaPathSchemaError):
        MetaPath(name=MetaPathName("X"), node_types=(NodeTypeName("paper"),), relations=(WRITES,))


# # Validation


def test_valid_graph_has_no_violation(toy_graph: HeteroGraph) -> None:
    report = validate(toy_graph)

    assert report.is_valid
    assert report.node_counts == {"paper": 6, "author": 5}
    assert report.edge_counts == {"writes": 12}


def test_validation_lists_every_broken_invariant(toy_schema: GraphSchema) -> None:
    graph = HeteroGraph.create(
        toy_schema,
        node_ids={"paper": ["p0", "p1", "p1"], "author": ["a0"]},
        edges={
            "writes": [("p0", "a0"), ("p0", "zz"), ("a0", "a0"), ("p0", "a0")],
            "cites": [("p0", "p1")],
        },
        features={"paper": np.zeros((2, 3))},
    )

    kinds = Counter(each.kind for each in validate(graph).violations)

    assert kinds == {
        ViolationKind.DUPLICATE_NODE: 1,
        ViolationKind.DUPLICATE_EDGE: 1,
        ViolationKind.MISSING_FEATURE_ROWS: 1,
        ViolationKind.DANGLING_ENDPOINT: 1,
        ViolationKind.SIGNATURE_MISMATCH: 1,
        ViolationKind.UNKNOWN_RELATION: 1,
    }


# # Dataset Files


def test_dataset_survives_a_write_and_a_load(tmp_path: Path, toy_graph: HeteroGraph) -> None:
    write_dataset(toy_graph, tmp_path / "toy")
    loaded = load_dataset(tmp_path / "toy")

    assert loaded.node_ids == toy_graph.node_ids
    assert sorted(loaded.edges[WRITES]) == sorted(toy_graph.edges[WRITES])
    np.testing.assert_array_equal(
        loaded.feature_matrix(NodeTypeName("paper")), toy_graph.feature_matrix(NodeTypeName("paper"))
    )
    assert load_labels(loaded, NodeTypeName("paper")) == load_labels(toy_graph, NodeTypeName("paper"))


def test_synthetic_dataset_matches_its_ledger(tmp_path: Path) -> None:
    ledger = generate_synthetic_dataset(tmp_path / "synthetic", 0)
    loaded = load_dataset(tmp_path / "synthetic")

    assert loaded.node_counts == ledger.node_counts == {"paper": 120, "author": 150, "field": 30}
    assert loaded.edge_counts == ledger.edge_counts
    assert loaded.features[NodeTypeName("field")] is None
    assert loaded.feature_dimension(NodeTypeName("field")) == 30


def test_missing_edge_file_is_named(tmp_path: Path, toy_graph: HeteroGraph) -> None:
    write_dataset(toy_graph, tmp_path / "toy")
    (tmp_path / "toy" / EDGES_FILE_TEMPLATE.format(relation="writes")).unlink()

    with pytest.raises(DatasetIngestionError) as error:
        load_dataset(tmp_path / "toy")

    assert error.value.filename == "edges_writes.tsv"


def test_dangling_edge_on_disk_fails_the_load(tmp_path: Path, toy_graph: HeteroGraph) -> None:
    write_dataset(toy_graph.with_edges(WRITES, [("p0", "a9")]), tmp_path / "toy")

    with pytest.raises(GraphValidationError) as error:
        load_dataset(tmp_path / "toy")

    assert error.value.violations[0].kind is ViolationKind.DANGLING_ENDPOINT


def test_missing_directory_is_refused(tmp_path: Path) -> None:
    with pytest.raises(DatasetIngestionError):
        load_dataset(tmp_path / "nowhere")


# # Semantic Subgraphs


def test_semantic_subgraph_matches_walk_enumeration(toy_graph: HeteroGraph) -> None:
    schema = toy_graph.schema

    papers = extract_semantic_subgraph(toy_graph, schema.metapaths[MetaPathName("PAP")])
    authors = extract_semantic_subgraph(toy_graph, schema.metapaths[MetaPathName("APA")])

    assert {tuple(each) for each in papers.pairs.tolist()} == _walk_pairs(
        list(toy_graph.edges[WRITES]), via_source=True
    )
    assert {tuple(each) for each in authors.pairs.tolist()} == _walk_pairs(
        list(toy_graph.edges[WRITES]), via_source=False
    )
    assert papers.num_nodes == 6
    assert authors.node_type == "author"


RANDOM_GRAPH_SEEDS = range(25)


def _random_toy_graph(schema: GraphSchema, seed: int) -> HeteroGraph:
    rng = np.random.default_rng(seed)
    papers, authors = int(rng.integers(1, 26)), int(rng.integers(1, 25))
    pool = [(f"p{p}", f"a{a}") for p, a in product(range(papers), range(authors))]
    picks = rng.choice(len(pool), size=int(rng.integers(0, min(len(pool), 60) + 1)), replace=False)

    return HeteroGraph.create(
        schema,
        node_ids={
            "paper": [f"p{idx}" for idx in range(papers)],
            "author": [f"a{idx}" for idx in range(authors)],
        },
        edges={"writes": [pool[each] for each in picks.tolist()]},
        features={"paper": None, "author": None},
    )


@pytest.mark.parametrize("seed", RANDOM_GRAPH_SEEDS)
def test_semantic_subgraphs_of_random_graphs_match_walk_enumeration(toy_schema: GraphSchema, seed: int) -> None:
    graph = _random_toy_graph(toy_schema, seed)
    edges = list(graph.edges[WRITES])
    papers = extract_semantic_subgraph(graph, toy_schema.metapaths[MetaPathName("PAP")])
    authors = extract_semantic_subgraph(graph, toy_schema.metapaths[MetaPathName("APA")])
    longer = MetaPath(
        name=MetaPathName("PAPAP"),
        node_types=(NodeTypeName("paper"), NodeTypeName("author")) * 2 + (NodeTypeName("paper"),),
        relations=(WRITES,) * 4,
    )
    two_step = _walk_pairs(edges, via_source=True)
    reflexive = two_step | {(u, u) for u in range(graph.node_count(NodeTypeName("paper")))}
    four_step = {(u, w) for u, v in two_step for v2, w in reflexive if v == v2 and u != w}

    assert {tuple(each) for each in papers.pairs.tolist()} == two_step
    assert {tuple(each) for each in authors.pairs.tolist()} == _walk_pairs(edges, via_source=False)
    assert {tuple(each) for each in extract_semantic_subgraph(graph, longer).pairs.tolist()} == four_step


def test_semantic_subgraph_is_symmetric_without_self_pairs(synthetic_graph: HeteroGraph) -> None:
    for each in synthetic_graph.schema.metapaths.values():
        subgraph = extract_semantic_subgraph(synthetic_graph, each)
        pairs = {tuple(pair) for pair in subgraph.pairs.tolist()}

        assert all(u != w for u, w in pairs)
        assert pairs == {(w, u) for u, w in pairs}


def test_isolated_nodes_attend_to_themselves(toy_graph: HeteroGraph) -> None:
    lonely = toy_graph.with_edges(WRITES, [("p0", "a0"), ("p1", "a0")])
    subgraph = extract_semantic_subgraph(lonely, lonely.schema.metapaths[MetaPathName("PAP")])
    sources = set(subgraph.attention_pairs[:, 0].tolist())

    assert sources == set(range(6))
    assert [2, 2] in subgraph.attention_pairs.tolist()


# # Link Splits


def test_split_sizes_and_disjointness(synthetic_graph: HeteroGraph) -> None:
    relation = synthetic_graph.schema.target_relation
    assert relation is not None
    total = synthetic_graph.edge_count(relation)

    split = split_edges(synthetic_graph, relation, (0.85, 0.05, 0.10), 3)
    parts = [set(map(tuple, each.tolist())) for each in (split.train, split.val, split.test)]

    assert split.val.shape[0] == int(0.05 * total)
    assert split.test.shape[0] == int(0.10 * total)
    assert sum(len(each) for each in parts) == total
    assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])


def test_split_is_an_exact_partition_of_the_edges(synthetic_graph: HeteroGraph) -> None:
    relation = RelationName("paper_author")
    split = split_edges(synthetic_graph, relation, (0.7, 0.15, 0.15), 2)
    parts = np.concatenate([split.train, split.val, split.test])

    assert Counter(map(tuple, parts.tolist())) == Counter(
        map(tuple, synthetic_graph.edge_index(relation).tolist())
    )


def test_split_refuses_repeated_edges(toy_graph: HeteroGraph) -> None:
    repeated = toy_graph.with_edges(WRITES, [*toy_graph.edges[WRITES], ("p0", "a0")])

    assert [each.kind for each in validate(repeated).violations] == [ViolationKind.DUPLICATE_EDGE]

    with pytest.raises(EdgeSplitError):
        split_edges(repeated, WRITES, (0.6, 0.2, 0.2), 0)


def test_split_negatives_are_non_edges(synthetic_graph: HeteroGraph) -> None:
    relation = RelationName("paper_author")
    split = split_edges(synthetic_graph, relation, (0.8, 0.1, 0.1), 0)
    edges = set(map(tuple, synthetic_graph.edge_index(relation).tolist()))
    negatives = [tuple(each) for each in np.concatenate([split.val_neg, split.test_neg]).tolist()]

    assert split.val_neg.shape == split.val.shape
    assert split.test_neg.shape == split.test.shape
    assert not set(negatives) & edges
    assert len(set(negatives)) == len(negatives)


def test_split_is_deterministic_per_seed(synthetic_graph: HeteroGraph) -> None:
    relation = RelationName("paper_author")
    first = split_edges(synthetic_graph, relation, (0.8, 0.1, 0.1), 5)
    second = split_edges(synthetic_graph, relation, (0.8, 0.1, 0.1), 5)
    other = split_edges(synthetic_graph, relation, (0.8, 0.1, 0.1), 6)

    np.testing.assert_array_equal(first.test, second.test)
    np.testing.assert_array_equal(first.test_neg, second.test_neg)
    assert not np.array_equal(first.test, other.test)


def test_split_refuses_bad_ratios(toy_graph: HeteroGraph) -> None:
    with pytest.raises(EdgeSplitError):
        split_edges(toy_graph, WRITES, (0.5, 0.2, 0.2), 0)

    with pytest.raises(EdgeSplitError):
        split_edges(toy_graph, WRITES, (0.98, 0.01, 0.01), 0)

    with pytest.raises(EdgeSplitError):
        split_edges(toy_graph, RelationName("cites"), (0.8, 0.1, 0.1), 0)


def test_split_file_reads_back(tmp_path: Path, toy_graph: HeteroGraph) -> None:
    split = split_edges(toy_graph, WRITES, (0.6, 0.2, 0.2), 1)
    write_split(split, toy_graph, tmp_path)
    restored = read_split(toy_graph, WRITES, 1, tmp_path)

    for tag, pairs in split.by_tag().items():
        np.testing.assert_array_equal(restored.by_tag()[tag], pairs)


def test_non_edge_pool_too_small() -> None:
    with pytest.raises(NegativeSamplingError):
        sample_non_edges(
            num_sources=2,
            num_targets=2,
            forbidden={(0, 0), (0, 1), (1, 0)},
            count=2,
            rng=np.random.default_rng(0),
            distinct=True,
            exclude_self=False,
        )


def test_non_edges_from_a_dense_pool_are_exhausted_exactly() -> None:
    picks = sample_non_edges(
        num_sources=3,
        num_targets=3,
        forbidden={(0, 1), (1, 2), (2, 0)},
        count=3,
        rng=np.random.default_rng(0),
        distinct=True,
        exclude_self=True,
    )

    assert {tuple(each) for each in picks.tolist()} == {(1, 0), (2, 1), (0, 2)}


# # Rewiring


def test_rewiring_preserves_degrees(synthetic_graph: HeteroGraph) -> None:
    relation = RelationName("paper_author")
    rewired = rewire_relation(synthetic_graph, relation, 200, 0)
    before, after = synthetic_graph.edges[relation], rewired.edges[relation]

    assert Counter(s for s, _ in before) == Counter(s for s, _ in after)
    assert Counter(t for _, t in before) == Counter(t for _, t in after)
    assert len(set(after)) == len(after) == len(before)
    assert set(after) != set(before)
    assert validate(rewired).is_valid
