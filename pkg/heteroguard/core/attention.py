"""
Attention Encoder (attention.py) | Node-level and semantic-level attention over meta-path subgraphs, and the calibrated feature noise.

Each node type is projected into a shared hidden space. On every semantic subgraph, multi-head attention aggregates the neighbours of a node and records how much attention the node itself receives (its influence coefficient). A semantic attention then weighs the meta-paths of a node type before fusing them. The influence and semantic coefficients set the sensitivity of the noise added to the fused embeddings.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from dataclasses import dataclass
from logging import Logger, getLogger
from math import sqrt
from typing import Mapping, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from blueprint.schemas import (
    AttentionReport,
    EncoderSection,
    MetaPathAttention,
    PrivacySpec,
)
from core.constants import (
    LEAKY_RELU_SLOPE,
    LOGGER_NAME,
    FloatMatrix,
    FloatVector,
    MetaPathName,
    NodeTypeName,
    RelationName,
)
from core.graph import HeteroGraph, SemanticSubgraph
from core.privacy import feature_sensitivity, gaussian_sigma
from utils.exceptions import (
    DegenerateNeighborhoodError,
    EncoderShapeError,
    InvalidArgumentError,
    PrivacySpecError,
)
from utils.processors import derive_generator, derive_torch_generator

logger: Logger = getLogger(LOGGER_NAME)

_ALPHA_HISTOGRAM_BINS: int = 10

# # Attention Kernels — START


def project(features: Tensor, weight: Tensor) -> Tensor:
    if features.dim() != 2 or features.shape[1] != weight.shape[0]:
        raise EncoderShapeError(
            expected=f"(*, {weight.shape[0]})",
            has=tuple(features.shape),
            context="The feature columns must match the projection input dimension.",
        )

    return features @ weight


def node_attention(
    pairs: Tensor,
    embeddings: Tensor,
    attention: Tensor,
    *,
    head: int,
    num_nodes: int,
) -> Tensor:
    """
    The attention weight of every (u, w) pair for one head, normalised over the neighbours w of each u.

    Args:
        pairs (Tensor): (E, 2) row positions, u first.
        embeddings (Tensor): (n, hidden) embeddings, split evenly across the heads.
        attention (Tensor): (heads, 2 * hidden / heads) attention vectors.
        head (int): The head to evaluate.
        num_nodes (int): The node count n.

    Raises:
        DegenerateNeighborhoodError: When a node has no pair at all.

    Returns:
        Tensor: (E,) weights, summing to 1 over the pairs of each u.
    """
    heads, doubled_width = attention.shape
    head_width: int = doubled_width // 2

    if embeddings.shape != (num_nodes, heads * head_width):
        raise EncoderShapeError(
            expected=(num_nodes, heads * head_width), has=tuple(embeddings.shape)
        )

    sources, targets = pairs[:, 0], pairs[:, 1]
    neighbour_counts = torch.bincount(sources, minlength=num_nodes)

    if bool((neighbour_counts == 0).any()):
        raise DegenerateNeighborhoodError(
            f"{int((neighbour_counts == 0).sum())} node(s) have an empty neighbourhood without a self-loop."
        )

    head_view = embeddings.reshape(num_nodes, heads, head_width)[:, head, :]
    scores = F.leaky_relu(
        head_view[sources] @ attention[head, :head_width]
        + head_view[targets] @ attention[head, head_width:],
        LEAKY_RELU_SLOPE,
    )
    group_max = torch.zeros(num_nodes, dtype=scores.dtype).scatter_reduce(
        0, sources, scores.detach(), reduce="amax", include_self=False
    )
    exponentials = torch.exp(scores - group_max[sources])
    normaliser = torch.zeros(num_nodes, dtype=scores.dtype).index_add(
        0, sources, exponentials
    )

    return exponentials / normaliser[sources]


def multi_head_aggregate(
    pairs: Tensor,
    embeddings: Tensor,
    attention: Tensor,
    *,
    num_nodes: int,
) -> tuple[Tensor, Tensor]:
    """
    Aggregates the neighbours of every node with each head, activates with ELU and concatenates the heads.

    The influence coefficient of a node is the logistic of the mean over heads of the attention it receives from the nodes it neighbours.

    Returns:
        tuple[Tensor, Tensor]: The (n, hidden) embeddings and the (n,) influence coefficients.
    """
    heads, doubled_width = attention.shape
    head_width: int = doubled_width // 2
    sources, targets = pairs[:, 0], pairs[:, 1]
    head_outputs: list[Tensor] = []
    received = torch.zeros(num_nodes, dtype=embeddings.dtype)

    for each_head in range(heads):
        weights = node_attention(
            pairs, embeddings, attention, head=each_head, num_nodes=num_nodes
        )
        neighbour_view = embeddings.reshape(num_nodes, heads, head_width)[:, each_head, :]
        aggregated = torch.zeros(
            num_nodes, head_width, dtype=embeddings.dtype
        ).index_add(0, sources, weights.unsqueeze(1) * neighbour_view[targets])

        head_outputs.append(F.elu(aggregated))
        received = received + torch.zeros(num_nodes, dtype=embeddings.dtype).index_add(
            0, targets, weights
        )

    return torch.cat(head_outputs, dim=1), torch.sigmoid(received / heads)


def semantic_attention(
    per_metapath_embeddings: Sequence[Tensor], weight: Tensor, bias: Tensor
) -> Tensor:
    """
    Scores each meta-path by the mean over its nodes of LeakyReLU(w z + b) and normalises the scores with a softmax.
    """
    if not per_metapath_embeddings:
        raise InvalidArgumentError("The semantic attention needs at least one meta-path.")

    node_counts: set[int] = {each.shape[0] for each in per_metapath_embeddings}

    if len(node_counts) != 1:
        raise EncoderShapeError(
            expected="a shared node count", has=sorted(node_counts)
        )

    scores = torch.stack(
        [
            F.leaky_relu(each @ weight + bias, LEAKY_RELU_SLOPE).mean()
            for each in per_metapath_embeddings
        ]
    )
    return torch.softmax(scores, dim=0)


def fuse(per_metapath_embeddings: Sequence[Tensor], beta: Tensor) -> Tensor:
    if beta.dim() != 1 or beta.shape[0] != len(per_metapath_embeddings):
        raise EncoderShapeError(
            expected=len(per_metapath_embeddings),
            has=tuple(beta.shape),
            context="One semantic coefficient per meta-path is required.",
        )

    return torch.einsum("m,mnd->nd", beta, torch.stack(list(per_metapath_embeddings)))


# # Attention Kernels — END

# # Encoder — START


@dataclass(frozen=True, eq=False)
class TypeAttention:
    node_type: NodeTypeName
    metapaths: tuple[MetaPathName, ...]
    per_metapath: tuple[Tensor, ...]
    fused: Tensor
    alpha: Tensor | None  # * (M, n), None without a meta-path.
    beta: Tensor | None  # * (M,)


class HeteroAttentionEncoder(nn.Module):
    """
    Per-type projection, per meta-path and layer attention vectors, per-type semantic MLP. Every parameter is float64.
    """

    def __init__(
        self,
        *,
        input_dims: Mapping[str, int],
        metapaths: Mapping[str, NodeTypeName],
        config: EncoderSection,
        seed: int,
    ) -> None:
        super().__init__()

        self.node_types: tuple[NodeTypeName, ...] = tuple(NodeTypeName(each) for each in input_dims)
        self.metapath_types: dict[MetaPathName, NodeTypeName] = {
            MetaPathName(name): node_type for name, node_type in metapaths.items()
        }
        self.hidden: int = config.hidden
        self.heads: int = config.heads
        self.layers: int = config.layers
        self.dropout: float = config.dropout
        head_width: int = config.hidden // config.heads
        generator = derive_torch_generator(seed, module="attention", purpose="init")

        def uniform(*shape: int, fan_in: int) -> nn.Parameter:
            bound: float = 1.0 / sqrt(fan_in)
            return nn.Parameter(
                (torch.rand(*shape, generator=generator, dtype=torch.float64) * 2.0 - 1.0)
                * bound
            )

        self.projection = nn.ParameterDict(
            {each: uniform(dim, config.hidden, fan_in=dim) for each, dim in input_dims.items()}
        )
        self.attention = nn.ParameterDict(
            {
                f"{name}:{layer}": uniform(config.heads, 2 * head_width, fan_in=2 * head_width)
                for name in self.metapath_types
                for layer in range(config.layers)
            }
        )
        self.layer_weights = nn.ParameterDict(
            {
                f"{name}:{layer}": uniform(config.hidden, config.hidden, fan_in=config.hidden)
                for name in self.metapath_types
                for layer in range(1, config.layers)
            }
        )
        self.semantic_weight = nn.ParameterDict(
            {each: uniform(config.hidden, fan_in=config.hidden) for each in input_dims}
        )
        self.semantic_bias = nn.ParameterDict(
            {each: nn.Parameter(torch.zeros((), dtype=torch.float64)) for each in input_dims}
        )

    def forward(
        self,
        features: Mapping[NodeTypeName, Tensor],
        subgraphs: Mapping[MetaPathName, Tensor],
        *,
        dropout_generator: torch.Generator | None = None,
    ) -> dict[NodeTypeName, TypeAttention]:
        """
        Runs both attention levels. `subgraphs` maps a meta-path to the attention pairs of its subgraph. Dropout on the projected inputs only applies when a generator is given.
        """
        outputs: dict[NodeTypeName, TypeAttention] = {}

        for each_type in self.node_types:
            projected = project(features[each_type], self.projection[each_type])

            if dropout_generator is not None and self.dropout > 0.0:
                keep = torch.rand(
                    projected.shape, generator=dropout_generator, dtype=projected.dtype
                ) >= self.dropout
                projected = projected * keep / (1.0 - self.dropout)

            names: tuple[MetaPathName, ...] = tuple(
                name for name, node_type in self.metapath_types.items() if node_type == each_type
            )

            if not names:
                outputs[each_type] = TypeAttention(
                    node_type=each_type,
                    metapaths=(),
                    per_metapath=(),
                    fused=projected,
                    alpha=None,
                    beta=None,
                )
                continue

            per_metapath: list[Tensor] = []
            alphas: list[Tensor] = []

            for each_name in names:
                hidden_state = projected

                for layer in range(self.layers):
                    if layer > 0:
                        hidden_state = hidden_state @ self.layer_weights[f"{each_name}:{layer}"]

                    hidden_state, alpha = multi_head_aggregate(
                        subgraphs[each_name],
                        hidden_state,
                        self.attention[f"{each_name}:{layer}"],
                        num_nodes=projected.shape[0],
                    )

                per_metapath.append(hidden_state)
                alphas.append(alpha)

            beta = semantic_attention(
                per_metapath, self.semantic_weight[each_type], self.semantic_bias[each_type]
            )
            outputs[each_type] = TypeAttention(
                node_type=each_type,
                metapaths=names,
                per_metapath=tuple(per_metapath),
                fused=fuse(per_metapath, beta),
                alpha=torch.stack(alphas),
                beta=beta,
            )

        return outputs


def build_encoder(
    graph: HeteroGraph,
    subgraphs: Mapping[MetaPathName, SemanticSubgraph],
    config: EncoderSection,
    seed: int,
) -> HeteroAttentionEncoder:
    return HeteroAttentionEncoder(
        input_dims={
            each: graph.feature_dimension(each) for each in graph.schema.node_types
        },
        metapaths={name: each.node_type for name, each in subgraphs.items()},
        config=config,
        seed=seed,
    )


def encoder_inputs(
    graph: HeteroGraph, subgraphs: Mapping[MetaPathName, SemanticSubgraph]
) -> tuple[dict[NodeTypeName, Tensor], dict[MetaPathName, Tensor]]:
    return (
        {
            each: torch.as_tensor(graph.feature_matrix(each), dtype=torch.float64)
            for each in graph.schema.node_types
        },
        {
            name: torch.as_tensor(each.attention_pairs, dtype=torch.long)
            for name, each in subgraphs.items()
        },
    )


def _link_terms(positive_scores: Tensor, negative_scores: Tensor) -> Tensor:
    return -F.logsigmoid(positive_scores).mean() - F.logsigmoid(-negative_scores).mean()


def fit_encoder(
    encoder: HeteroAttentionEncoder,
    graph: HeteroGraph,
    subgraphs: Mapping[MetaPathName, SemanticSubgraph],
    config: EncoderSection,
    seed: int,
) -> list[float]:
    """
    Trains the encoder without labels. The fused embeddings of a node type should score the pairs of its semantic subgraphs above uniformly drawn pairs, and the fused embeddings of two linked node types should score the edges of their relation above uniformly drawn type-correct pairs. The second term places every node type in one space.

    Returns:
        list[float]: The loss of every epoch.
    """
    features, attention_pairs = encoder_inputs(graph, subgraphs)
    positives: dict[MetaPathName, Tensor] = {
        name: torch.as_tensor(each.undirected_pairs, dtype=torch.long)
        for name, each in subgraphs.items()
        if each.undirected_pairs.shape[0]
    }
    relation_pairs: dict[RelationName, Tensor] = {
        relation: torch.as_tensor(graph.edge_index(relation), dtype=torch.long)
        for relation in graph.schema.relations
        if graph.edge_count(relation)
    }
    losses: list[float] = []

    if not (positives or relation_pairs) or config.epochs == 0:
        logger.info("Feature learning skipped, there are no pairs to learn from.")
        return losses

    optimizer = torch.optim.Adam(
        encoder.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    dropout_generator = derive_torch_generator(seed, module="attention", purpose="dropout")
    negative_generator = derive_torch_generator(seed, module="attention", purpose="negatives")
    encoder.train()

    for epoch in range(config.epochs):
        optimizer.zero_grad()
        outputs = encoder(features, attention_pairs, dropout_generator=dropout_generator)
        loss = torch.zeros((), dtype=torch.float64)

        for name, pairs in positives.items():
            fused = outputs[encoder.metapath_types[name]].fused
            negatives = torch.randint(
                0,
                fused.shape[0],
                (pairs.shape[0] * config.negatives, 2),
                generator=negative_generator,
            )
            loss = loss + _link_terms(
                (fused[pairs[:, 0]] * fused[pairs[:, 1]]).sum(dim=1),
                (fused[negatives[:, 0]] * fused[negatives[:, 1]]).sum(dim=1),
            )

        for relation, pairs in relation_pairs.items():
            signature = graph.schema.relations[relation]
            sources = outputs[signature.source].fused
            targets = outputs[signature.target].fused
            drawn: int = pairs.shape[0] * config.negatives
            negative_sources = torch.randint(0, sources.shape[0], (drawn,), generator=negative_generator)
            negative_targets = torch.randint(0, targets.shape[0], (drawn,), generator=negative_generator)
            loss = loss + _link_terms(
                (sources[pairs[:, 0]] * targets[pairs[:, 1]]).sum(dim=1),
                (sources[negative_sources] * targets[negative_targets]).sum(dim=1),
            )

        loss.backward()
        optimizer.step()
        losses.append(float(loss))
        logger.debug(f"Feature learning epoch {epoch + 1}/{config.epochs}: loss {losses[-1]:.6f}.")

    encoder.eval()
    logger.info(f"Feature learning finished after {config.epochs} epoch(s), last loss {losses[-1]:.6f}.")
    return losses


# # Encoder — END

# # Feature Noise — START


@dataclass(frozen=True, eq=False)
class PerturbedEmbeddings:
    clean: dict[NodeTypeName, FloatMatrix]  # * Fused and row-clipped, before noise.
    perturbed: dict[NodeTypeName, FloatMatrix]
    sensitivity: dict[NodeTypeName, FloatVector]
    attention: dict[NodeTypeName, TypeAttention]
    feature_sigma: float


def clip_rows(matrix: FloatMatrix, bound: float) -> FloatMatrix:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    scale = np.minimum(1.0, bound / np.maximum(norms, np.finfo(np.float64).tiny))
    clipped = matrix * scale

    # * Rows a few units above the bound after rounding.
    over = np.linalg.norm(clipped, axis=1) > bound

    while bool(over.any()):
        scale[over] = np.nextafter(scale[over], 0.0)
        clipped = matrix * scale
        over = np.linalg.norm(clipped, axis=1) > bound

    return clipped


def perturb_embeddings(
    embeddings: FloatMatrix,
    *,
    sensitivity: FloatVector,
    sigma: float,
    noise_scale: float,
    rng: np.random.Generator,
) -> FloatMatrix:
    """
    h = z + noise_scale * N(0, (sigma * sensitivity_u)^2) per coordinate of row u.
    """
    resolved = np.asarray(embeddings, dtype=np.float64)

    if noise_scale == 0.0 or sigma == 0.0:
        return resolved.copy()

    deviation = (sigma * np.asarray(sensitivity, dtype=np.float64))[:, None]
    return resolved + noise_scale * deviation * rng.standard_normal(resolved.shape)


def encode_with_privacy(
    graph: HeteroGraph,
    subgraphs: Mapping[MetaPathName, SemanticSubgraph],
    encoder: HeteroAttentionEncoder,
    privacy: PrivacySpec,
    seed: int,
) -> PerturbedEmbeddings:
    """
    Fuses, clips and perturbs the embeddings of every node type.

    Rows are clipped to `privacy.embedding_clip` before noise. The per-node sensitivity follows the influence and semantic coefficients, types without a meta-path take the full clip bound.
    """
    if privacy.perturb_features and privacy.feature_budget <= 0.0:
        raise PrivacySpecError("The feature budget must be positive.")

    feature_sigma: float = (
        gaussian_sigma(
            privacy.feature_budget,
            privacy.delta,
            1.0,
            allow_large_epsilon=privacy.allow_large_epsilon,
        )
        if privacy.perturb_features
        else 0.0
    )

    if privacy.perturb_features and privacy.noise_scale < 1.0:
        logger.warning(
            f"Feature noise is scaled by {privacy.noise_scale}, the (epsilon_f, delta) guarantee only holds at scale 1."
        )

    features, attention_pairs = encoder_inputs(graph, subgraphs)

    with torch.no_grad():
        outputs = encoder(features, attention_pairs)

    clean: dict[NodeTypeName, FloatMatrix] = {}
    perturbed: dict[NodeTypeName, FloatMatrix] = {}
    sensitivity: dict[NodeTypeName, FloatVector] = {}

    for iteration, each_type in enumerate(graph.schema.node_types):
        output: TypeAttention = outputs[each_type]
        clean[each_type] = clip_rows(output.fused.numpy(), privacy.embedding_clip)

        if output.alpha is None or output.beta is None:
            sensitivity[each_type] = np.full(clean[each_type].shape[0], privacy.embedding_clip)
        else:
            sensitivity[each_type] = feature_sensitivity(
                output.alpha.numpy(),
                output.beta.numpy(),
                privacy.embedding_clip,
                reduction=privacy.sensitivity_reduction,
            )

        perturbed[each_type] = perturb_embeddings(
            clean[each_type],
            sensitivity=sensitivity[each_type],
            sigma=feature_sigma,
            noise_scale=privacy.noise_scale,
            rng=derive_generator(
                seed, module="attention", purpose="feature-noise", iteration=iteration
            ),
        )

    logger.info(
        f"Feature noise: sigma {feature_sigma:.6g} at epsilon_f = {privacy.epsilon_f}, scale {privacy.noise_scale}, reduction `{privacy.sensitivity_reduction.value}`."
    )
    return PerturbedEmbeddings(
        clean=clean,
        perturbed=perturbed,
        sensitivity=sensitivity,
        attention=outputs,
        feature_sigma=feature_sigma,
    )


def attention_report(embeddings: PerturbedEmbeddings, privacy: PrivacySpec) -> AttentionReport:
    entries: list[MetaPathAttention] = []

    for each_type, output in embeddings.attention.items():
        if output.alpha is None or output.beta is None:
            continue

        for position, each_name in enumerate(output.metapaths):
            alpha = output.alpha[position].numpy()
            counts, edges = np.histogram(alpha, bins=_ALPHA_HISTOGRAM_BINS, range=(0.0, 1.0))
            entries.append(
                MetaPathAttention(
                    name=each_name,
                    node_type=each_type,
                    beta=float(output.beta[position]),
                    alpha_mean=float(alpha.mean()) if alpha.size else 0.0,
                    alpha_bin_edges=edges.tolist(),
                    alpha_counts=counts.tolist(),
                )
            )

    return AttentionReport(
        metapaths=entries,
        feature_sigma=embeddings.feature_sigma,
        noise_scale=privacy.noise_scale,
        sensitivity_reduction=privacy.sensitivity_reduction,
    )


# # Feature Noise — END
