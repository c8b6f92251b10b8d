from math import exp, isfinite

import numpy as np
import pytest
import torch
from torch.func import functional_call

from blueprint.schemas import EncoderSection, PrivacySpec
from core.attention import (
    attention_report,
    build_encoder,
    clip_rows,
    encode_with_privacy,
    encoder_inputs,
    fit_encoder,
    fuse,
    multi_head_aggregate,
    node_attention,
    perturb_embeddings,
    project,
    semantic_attention,
)
from core.constants import LEAKY_RELU_SLOPE, MetaPathName, NodeTypeName, SensitivityReduction
from core.graph import HeteroGraph, SemanticSubgraph, extract_semantic_subgraph
from core.privacy import gaussian_sigma
from utils.exceptions import (
    DegenerateNeighborhoodError,
    EncoderShapeError,
    InvalidArgumentError,
)

SMALL_ENCODER = EncoderSection(heads=2, hidden=8, epochs=3, dropout=0.5)


@pytest.fixture
def subgraphs(synthetic_graph: HeteroGraph) -> dict[MetaPathName, SemanticSubgraph]:
    return {
        name: extract_semantic_subgraph(synthetic_graph, each)
        for name, each in synthetic_graph.schema.metapaths.items()
    }


@pytest.fixture
def toy_subgraphs(toy_graph: HeteroGraph) -> dict[MetaPathName, SemanticSubgraph]:
    return {name: extract_semantic_subgraph(toy_graph, each) for name, each in toy_graph.schema.metapaths.items()}


def _star_pairs() -> torch.Tensor:
    return torch.tensor([[0, 1], [0, 2], [1, 0], [2, 0], [2, 1], [3, 3]], dtype=torch.long)


# # Kernels


def test_projection_reference_value() -> None:
    projected = project(
        torch.tensor([[1.0, 2.0]], dtype=torch.float64),
        torch.tensor([[3.0], [4.0]], dtype=torch.float64),
    )

    assert projected.tolist() == [[11.0]]


def test_node_attention_reference_values() -> None:
    pairs = torch.tensor([[0, 0], [0, 1], [1, 0]], dtype=torch.long)
    embeddings = torch.tensor([[1.0], [2.0]], dtype=torch.float64)

    # * Node 0 scores its neighbours 1.5 and 2.0.
    weights = node_attention(
        pairs, embeddings, torch.tensor([[1.0, 0.5]], dtype=torch.float64), head=0, num_nodes=2
    )
    assert weights.tolist() == pytest.approx([1 / (1 + exp(0.5)), 1 / (1 + exp(-0.5)), 1.0])

    # * Negative scores -1 and -2 go through the LeakyReLU slope.
    weights = node_attention(
        pairs, embeddings, torch.tensor([[0.0, -1.0]], dtype=torch.float64), head=0, num_nodes=2
    )
    assert weights.tolist() == pytest.approx(
        [1 / (1 + exp(-LEAKY_RELU_SLOPE)), 1 / (1 + exp(LEAKY_RELU_SLOPE)), 1.0]
    )


def test_multi_head_aggregate_reference_values() -> None:
    pairs = torch.tensor([[0, 0], [0, 1], [1, 0]], dtype=torch.long)
    low, high = 1 / (1 + exp(0.5)), 1 / (1 + exp(-0.5))
    embeddings, alpha = multi_head_aggregate(
        pairs,
        torch.tensor([[1.0], [2.0]], dtype=torch.float64),
        torch.tensor([[1.0, 0.5]], dtype=torch.float64),
        num_nodes=2,
    )

    assert embeddings.flatten().tolist() == pytest.approx([low + 2 * high, 1.0])
    assert alpha.tolist() == pytest.approx([1 / (1 + exp(-(1 + low))), 1 / (1 + exp(-high))])

    embeddings, alpha = multi_head_aggregate(
        pairs,
        torch.tensor([[-1.0], [-2.0]], dtype=torch.float64),
        torch.zeros(1, 2, dtype=torch.float64),
        num_nodes=2,
    )

    assert embeddings.flatten().tolist() == pytest.approx([exp(-1.5) - 1, exp(-1.0) - 1])
    assert alpha.tolist() == pytest.approx([1 / (1 + exp(-1.5)), 1 / (1 + exp(-0.5))])


def test_node_attention_normalises_per_source() -> None:
    generator = torch.Generator().manual_seed(0)
    embeddings = torch.randn(4, 6, generator=generator, dtype=torch.float64)
    attention = torch.randn(2, 6, generator=generator, dtype=torch.float64)
    pairs = _star_pairs()

    for head in range(2):
        weights = node_attention(pairs, embeddings, attention, head=head, num_nodes=4)
        totals = torch.zeros(4, dtype=torch.float64).index_add(0, pairs[:, 0], weights)

        assert torch.all(weights > 0)
        torch.testing.assert_close(totals, torch.ones(4, dtype=torch.float64))


def test_node_attention_refuses_an_empty_neighbourhood() -> None:
    pairs = torch.tensor([[0, 1], [1, 0]], dtype=torch.long)

    with pytest.raises(DegenerateNeighborhoodError):
        node_attention(
            pairs,
            torch.zeros(3, 4, dtype=torch.float64),
            torch.zeros(1, 8, dtype=torch.float64),
            head=0,
            num_nodes=3,
        )


def test_influence_coefficients_lie_strictly_inside_the_unit_interval() -> None:
    generator = torch.Generator().manual_seed(1)
    embeddings, alpha = multi_head_aggregate(
        _star_pairs(),
        torch.randn(4, 6, generator=generator, dtype=torch.float64),
        torch.randn(3, 4, generator=generator, dtype=torch.float64),
        num_nodes=4,
    )

    assert embeddings.shape == (4, 6)
    assert torch.all((alpha > 0) & (alpha < 1))


def test_semantic_attention_is_a_softmax() -> None:
    generator = torch.Generator().manual_seed(2)
    per_metapath = [torch.randn(5, 4, generator=generator, dtype=torch.float64) for _ in range(3)]
    beta = semantic_attention(per_metapath, torch.randn(4, dtype=torch.float64), torch.zeros((), dtype=torch.float64))

    assert beta.shape == (3,)
    assert float(beta.sum()) == pytest.approx(1.0)

    fused = fuse(per_metapath, beta)
    torch.testing.assert_close(fused, sum(b * z for b, z in zip(beta, per_metapath)))


def test_semantic_attention_shape_checks() -> None:
    with pytest.raises(InvalidArgumentError):
        semantic_attention([], torch.zeros(2), torch.zeros(()))

    with pytest.raises(EncoderShapeError):
        semantic_attention([torch.zeros(3, 2), torch.zeros(4, 2)], torch.zeros(2), torch.zeros(()))

    with pytest.raises(EncoderShapeError):
        fuse([torch.zeros(3, 2)], torch.ones(2) / 2)


# # Encoder


def test_encoder_gradient_matches_finite_differences(
    toy_graph: HeteroGraph, toy_subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(toy_graph, toy_subgraphs, SMALL_ENCODER, seed=0)
    features, pairs = encoder_inputs(toy_graph, toy_subgraphs)
    names: list[str] = [name for name, _ in encoder.named_parameters()]
    node_types: list[NodeTypeName] = list(features)
    generator = torch.Generator().manual_seed(3)
    readout = {
        each: torch.randn(toy_graph.node_count(each), SMALL_ENCODER.hidden, generator=generator, dtype=torch.float64)
        for each in node_types
    }

    def weighted_output(*tensors: torch.Tensor) -> torch.Tensor:
        params = dict(zip(names, tensors[: len(names)]))
        inputs = dict(zip(node_types, tensors[len(names) :]))
        outputs = functional_call(encoder, params, (inputs, pairs))
        return torch.stack([(outputs[each].fused * readout[each]).sum() for each in node_types]).sum()

    inputs = tuple(
        each.detach().clone().requires_grad_(True)
        for each in [*encoder.parameters(), *(features[each] for each in node_types)]
    )

    assert torch.autograd.gradcheck(weighted_output, inputs, eps=1e-5, atol=1e-8, rtol=1e-4)


def test_encoder_is_equivariant_to_node_relabelling(
    toy_graph: HeteroGraph, toy_subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(toy_graph, toy_subgraphs, SMALL_ENCODER, seed=0)
    features, pairs = encoder_inputs(toy_graph, toy_subgraphs)
    rng = np.random.default_rng(9)
    # * New position i holds the old node order[i].
    order = {each: rng.permutation(toy_graph.node_count(each)) for each in features}
    relabel = {each: np.argsort(positions) for each, positions in order.items()}
    relabelled_pairs = {
        name: torch.as_tensor(relabel[encoder.metapath_types[name]][each.numpy()], dtype=torch.long)
        for name, each in pairs.items()
    }

    with torch.no_grad():
        original = encoder(features, pairs)
        relabelled = encoder(
            {each: matrix[torch.as_tensor(order[each])] for each, matrix in features.items()},
            relabelled_pairs,
        )

    for each_type, positions in order.items():
        index = torch.as_tensor(positions)
        expected, actual = original[each_type], relabelled[each_type]

        assert expected.alpha is not None and actual.alpha is not None
        torch.testing.assert_close(actual.fused, expected.fused[index])
        torch.testing.assert_close(actual.alpha, expected.alpha[:, index])
        torch.testing.assert_close(actual.beta, expected.beta)


def test_encoder_outputs_per_type(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)
    outputs = encoder(*encoder_inputs(synthetic_graph, subgraphs))
    paper = outputs[NodeTypeName("paper")]

    assert paper.fused.shape == (120, 8)
    assert paper.alpha is not None and paper.beta is not None
    assert paper.alpha.shape == (2, 120)
    assert float(paper.beta.sum()) == pytest.approx(1.0)
    assert set(paper.metapaths) == {"PAP", "PFP"}
    assert outputs[NodeTypeName("field")].fused.shape == (30, 8)


def test_encoder_refuses_mismatched_feature_columns(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)
    features, pairs = encoder_inputs(synthetic_graph, subgraphs)
    features[NodeTypeName("paper")] = torch.zeros(120, 5, dtype=torch.float64)

    with pytest.raises(EncoderShapeError):
        encoder(features, pairs)


def test_encoder_initialisation_is_seeded(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    first = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=4)
    second = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=4)

    for (name, left), (_, right) in zip(first.named_parameters(), second.named_parameters()):
        assert torch.equal(left, right), name


def test_fit_encoder_records_finite_losses(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)
    losses = fit_encoder(encoder, synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)

    assert len(losses) == SMALL_ENCODER.epochs
    assert all(isfinite(each) for each in losses)


@pytest.mark.slow
def test_encoder_loss_trace_does_not_increase_after_warmup(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    config = EncoderSection(heads=4, hidden=32, epochs=100, dropout=0.0, learning_rate=0.01)
    encoder = build_encoder(synthetic_graph, subgraphs, config, seed=0)
    losses = fit_encoder(encoder, synthetic_graph, subgraphs, config, seed=0)
    windows = np.asarray(losses[10:]).reshape(-1, 10).mean(axis=1)

    assert losses[-1] < losses[0]
    assert np.all(np.diff(windows) <= 0.02 * windows[0])


# # Feature Noise


def test_clip_rows_bounds_every_row() -> None:
    matrix = np.random.default_rng(0).normal(scale=5.0, size=(50, 7))
    clipped = clip_rows(matrix, 1.0)
    norms = np.linalg.norm(matrix, axis=1)

    assert np.linalg.norm(clipped, axis=1).max() <= 1.0
    np.testing.assert_array_equal(clipped[norms <= 1.0], matrix[norms <= 1.0])


def test_feature_noise_matches_the_calibrated_deviation() -> None:
    sigma = gaussian_sigma(0.5, 1e-5, 1.0)
    noised = perturb_embeddings(
        np.zeros((100_000, 1)),
        sensitivity=np.ones(100_000),
        sigma=sigma,
        noise_scale=1.0,
        rng=np.random.default_rng(5),
    )

    assert float(noised.std()) == pytest.approx(sigma, rel=0.01)


def test_feature_noise_follows_the_per_node_sensitivity() -> None:
    noised = perturb_embeddings(
        np.zeros((2, 50_000)),
        sensitivity=np.array([0.0, 2.0]),
        sigma=1.5,
        noise_scale=0.1,
        rng=np.random.default_rng(6),
    )

    assert float(np.abs(noised[0]).max()) == 0.0
    assert float(noised[1].std()) == pytest.approx(0.3, rel=0.02)


def test_encode_with_privacy_clips_and_perturbs(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)
    privacy = PrivacySpec(epsilon=1.0, embedding_clip=0.5)
    embeddings = encode_with_privacy(synthetic_graph, subgraphs, encoder, privacy, seed=0)
    again = encode_with_privacy(synthetic_graph, subgraphs, encoder, privacy, seed=0)

    assert embeddings.feature_sigma == pytest.approx(gaussian_sigma(0.5, 1e-5, 1.0))

    for each_type in synthetic_graph.schema.node_types:
        assert np.linalg.norm(embeddings.clean[each_type], axis=1).max() <= 0.5
        assert np.all(embeddings.sensitivity[each_type] <= 0.5)
        assert not np.array_equal(embeddings.perturbed[each_type], embeddings.clean[each_type])
        np.testing.assert_array_equal(embeddings.perturbed[each_type], again.perturbed[each_type])


def test_encode_without_feature_privacy_keeps_the_clean_rows(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)
    embeddings = encode_with_privacy(
        synthetic_graph, subgraphs, encoder, PrivacySpec(perturb_features=False), seed=0
    )

    assert embeddings.feature_sigma == 0.0

    for each_type in synthetic_graph.schema.node_types:
        np.testing.assert_array_equal(embeddings.perturbed[each_type], embeddings.clean[each_type])


def test_attention_report_lists_every_metapath(
    synthetic_graph: HeteroGraph, subgraphs: dict[MetaPathName, SemanticSubgraph]
) -> None:
    encoder = build_encoder(synthetic_graph, subgraphs, SMALL_ENCODER, seed=0)
    privacy = PrivacySpec(sensitivity_reduction=SensitivityReduction.MAX)
    report = attention_report(
        encode_with_privacy(synthetic_graph, subgraphs, encoder, privacy, seed=0), privacy
    )
    betas: dict[str, float] = {}

    for each in report.metapaths:
        betas[each.node_type] = betas.get(each.node_type, 0.0) + each.beta
        assert sum(each.alpha_counts) == synthetic_graph.node_count(NodeTypeName(each.node_type))

    assert {each.name for each in report.metapaths} == {"PAP", "PFP", "APA", "FPF"}
    assert all(each == pytest.approx(1.0) for each in betas.values())
    assert report.sensitivity_reduction is SensitivityReduction.MAX
