"""
Shared fixtures: a hand-sized paper / author graph that can be checked by hand, the bundled synthetic graph, a run configuration small enough to finish in seconds and the desk configuration of the acceptance runs.
"""

from pathlib import Path

import numpy as np
import pytest
from frozendict import frozendict

from blueprint.schemas import (
    EncoderSection,
    EvaluationSection,
    PrivacySpec,
    RunConfig,
    SplitSection,
    TopologySection,
)
from core.constants import MetaPathName, NodeTypeName, RelationName
from core.graph import GraphSchema, HeteroGraph, MetaPath, RelationSignature
from core.pipeline import PipelineResult, run_pipeline
from core.synthetic import generate_synthetic_graph

PAPER, AUTHOR = NodeTypeName("paper"), NodeTypeName("author")
WRITES = RelationName("writes")

TOY_EDGES: list[tuple[str, str]] = [
    ("p0", "a0"),
    ("p0", "a1"),
    ("p1", "a1"),
    ("p1", "a2"),
    ("p2", "a2"),
    ("p2", "a3"),
    ("p3", "a3"),
    ("p3", "a4"),
    ("p4", "a4"),
    ("p4", "a0"),
    ("p5", "a0"),
    ("p5", "a2"),
]


@pytest.fixture
def toy_schema() -> GraphSchema:
    metapaths = [
        MetaPath(
            name=MetaPathName("PAP"),
            node_types=(PAPER, AUTHOR, PAPER),
            relations=(WRITES, WRITES),
        ),
        MetaPath(
            name=MetaPathName("APA"),
            node_types=(AUTHOR, PAPER, AUTHOR),
            relations=(WRITES, WRITES),
        ),
    ]
    return GraphSchema(
        node_types=(PAPER, AUTHOR),
        relations=frozendict({WRITES: RelationSignature(name=WRITES, source=PAPER, target=AUTHOR)}),
        metapaths=frozendict({each.name: each for each in metapaths}),
        target_relation=WRITES,
        classify_type=PAPER,
    )


@pytest.fixture
def toy_graph(toy_schema: GraphSchema) -> HeteroGraph:
    rng = np.random.default_rng(7)
    return HeteroGraph.create(
        toy_schema,
        node_ids={PAPER: [f"p{idx}" for idx in range(6)], AUTHOR: [f"a{idx}" for idx in range(5)]},
        edges={WRITES: TOY_EDGES},
        features={PAPER: rng.normal(size=(6, 3)), AUTHOR: rng.normal(size=(5, 3))},
        labels={PAPER: {f"p{idx}": "x" if idx % 2 else "y" for idx in range(6)}},
    )


@pytest.fixture
def toy_features(toy_graph: HeteroGraph) -> dict[NodeTypeName, np.ndarray]:
    rng = np.random.default_rng(11)
    return {each: rng.normal(size=(toy_graph.node_count(each), 3)) for each in toy_graph.schema.node_types}


@pytest.fixture(scope="session")
def synthetic_graph() -> HeteroGraph:
    return generate_synthetic_graph(0)


@pytest.fixture
def fast_config() -> RunConfig:
    return RunConfig(
        encoder=EncoderSection(heads=2, hidden=8, epochs=5, dropout=0.5),
        privacy=PrivacySpec(epsilon=1.0, iterations=5),
        topology=TopologySection(hidden=8, latent=4, batch_size=64, negatives=2, learning_rate=0.01),
        evaluation=EvaluationSection(sweep_seeds=1, allocation_seeds=1),
    )


def _sanity_config() -> RunConfig:
    return RunConfig(
        encoder=EncoderSection(heads=4, hidden=32, epochs=100, dropout=0.2, learning_rate=0.01),
        privacy=PrivacySpec(epsilon=1.0, iterations=100),
        topology=TopologySection(batch_size=64, learning_rate=0.1),
        split=SplitSection(train=0.7, val=0.15, test=0.15),
        evaluation=EvaluationSection(sweep_seeds=5),
    )


@pytest.fixture
def sanity_config() -> RunConfig:
    """
    The desk configuration of `configs/synthetic.cfg`, used by the acceptance runs.
    """
    return _sanity_config()


@pytest.fixture(scope="session")
def clean_sanity_run() -> PipelineResult:
    config = _sanity_config().copy(
        update={"privacy": PrivacySpec(perturb_features=False, perturb_topology=False, iterations=100)}
    )
    return run_pipeline(config, write_artifacts=False)


@pytest.fixture
def fast_config_file(tmp_path: Path) -> Path:
    path = tmp_path / "fast.cfg"
    path.write_text("\n".join(FAST_CONFIG_LINES) + "\n", encoding="utf-8")
    return path


FAST_CONFIG_LINES: list[str] = [
    "seed = 0",
    "task = lp",
    "encoder.heads = 2",
    "encoder.hidden = 8",
    "encoder.epochs = 5",
    "privacy.epsilon = 1.0",
    "privacy.iterations = 5",
    "topology.hidden = 8",
    "topology.latent = 4",
    "topology.batch_size = 64",
    "topology.negatives = 2",
]
